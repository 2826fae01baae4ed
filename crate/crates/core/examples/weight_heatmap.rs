//! Trains briefly, then exports the dynamic-weight heatmap for a test
//! document next to the random-summary baseline.
//!
//!     cargo run --release --example weight_heatmap -- [out_stem]

use dyle::corpus::synth_corpus;
use dyle::generator::WeightMode;
use dyle::trainer::{export_heatmap, predict, random_summary_weights, train, TrainConfig};

fn main() -> dyle::Result<()> {
    let stem = std::env::args().nth(1).unwrap_or_else(|| "heatmap".into());
    let config = TrainConfig {
        epochs: 20,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    let model = train(&config, &synth_corpus(0, 128, 12, 3)?)?.model;
    let test = synth_corpus(1000, 8, 12, 3)?;

    let p = predict(&model, test[0].input(), config.k, WeightMode::Dynamic, config.max_len)?;
    let wm = &p.summary.weight_matrix;
    let files = export_heatmap(wm, &stem)?;
    println!("decoded {:?}", p.text.to_text());
    println!("entropy {:.4} -> {} and {}", wm.mean_column_entropy(), files.csv.display(), files.svg.display());

    let (other, rand_wm) = random_summary_weights(&model, &test, 0, config.k, 1)?;
    let files = export_heatmap(&rand_wm, format!("{stem}-random"))?;
    println!(
        "random summary of {}: entropy {:.4} -> {}",
        test[other].id,
        rand_wm.mean_column_entropy(),
        files.svg.display()
    );
    Ok(())
}
