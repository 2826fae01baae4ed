//! Decodes one document with an untrained model in dynamic and static
//! mode and prints the per-step snippet weights and the marginal.
//!
//!     cargo run --release --example marginal_decoding

use dyle::corpus::{build_vocab, synth_corpus};
use dyle::generator::{marginal_next_token, WeightMode};
use dyle::model::Model;
use dyle::trainer::{predict, TrainConfig};

fn main() -> dyle::Result<()> {
    let docs = synth_corpus(4, 4, 8, 2)?;
    let config = TrainConfig::default();
    let model = Model::new(build_vocab(&docs, 1), config.dims, config.token_budget, 1)?;
    let doc = &docs[0];

    for mode in [WeightMode::Dynamic, WeightMode::Static] {
        let p = predict(&model, doc.input(), 3, mode, 6)?;
        println!("{mode}: X_K {:?} -> {:?}", p.extraction.indices, p.text.to_text());
        let wm = &p.summary.weight_matrix;
        for t in 0..wm.cols() {
            let col: Vec<String> = wm.column(t).iter().map(|w| format!("{w:.3}")).collect();
            println!("  step {t}: weights [{}]", col.join(", "));
        }
        println!("  mean column entropy {:.4}", wm.mean_column_entropy());
    }

    // The marginal is a convex mix of the per-snippet distributions.
    let step = dyle::generator::StepOutput {
        per_snippet_dists: vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]],
        dynamic_weights: vec![0.25, 0.75],
        per_snippet_logits: vec![0.0, 1.0986],
    };
    println!("marginal of a toy step: {:?}", marginal_next_token(&step));
    Ok(())
}
