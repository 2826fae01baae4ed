//! Finite-difference check of the full extractor + generator loss graph on a
//! small synthetic document.
//!
//!     cargo run --release --example grad_check

use dyle::corpus::{build_vocab, synth_corpus};
use dyle::extractor::hybrid_select;
use dyle::generator::WeightMode;
use dyle::losses::LossWeights;
use dyle::model::{Model, ModelDims};
use dyle::neural::{grad_check, Graph, ParamStore};
use dyle::oracle::greedy_oracle;

fn main() -> dyle::Result<()> {
    let docs = synth_corpus(7, 4, 6, 2)?;
    let vocab = build_vocab(&docs, 1);
    let dims = ModelDims {
        embed_dim: 6,
        hidden_dim: 8,
        head_dim: 5,
    };
    let model = Model::new(vocab, dims, 16, 3)?;
    let doc = &docs[0];
    let oracle = greedy_oracle(&doc.snippets, &doc.gold, 4);
    let fixed = hybrid_select(&oracle, model.score(doc.input())?.values(), 2);
    println!("oracle {:?}, X_K {:?}", oracle.indices, fixed.indices);

    for mode in [WeightMode::Dynamic, WeightMode::Static] {
        let build = |g: &mut Graph, p: &ParamStore| {
            let b = model.build_losses(g, p, doc, &oracle, &LossWeights::default(), mode, |_| fixed.clone())?;
            Ok(b.losses.total)
        };
        let start = std::time::Instant::now();
        let eps: f64 = std::env::args().nth(1).map_or(Ok(1e-4), |s| s.parse()).expect("eps");
        let report = grad_check(build, &model.params, eps, 11)?;
        println!(
            "{mode}: {} coordinates, max relative error {:.3e} ({:.1?})",
            report.coords_checked,
            report.max_rel_error,
            start.elapsed()
        );
        if let Some(w) = report.worst {
            println!("  worst: {}[{}] analytic {:.6e} numeric {:.6e}", w.param, w.index, w.analytic, w.numeric);
        }
    }
    Ok(())
}
