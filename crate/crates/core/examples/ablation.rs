//! Small ablation sweep on the synthetic corpus; writes ablation.csv to the
//! path given (default: print only).
//!
//!     cargo run --release --example ablation -- [out.csv]

use dyle::corpus::synth_corpus;
use dyle::trainer::{run_ablation, write_ablation_csv, TrainConfig, Variant};

fn main() -> dyle::Result<()> {
    let base = TrainConfig {
        epochs: 5,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    let train = synth_corpus(0, 48, 12, 3)?;
    let test = synth_corpus(1000, 16, 12, 3)?;
    let variants = [
        Variant::Full,
        Variant::NoHybrid,
        Variant::NoConsistency,
        Variant::NoOracle,
        Variant::K(2),
    ];
    let rows = run_ablation(&base, &train, &test, &variants)?;
    println!("{:<16} {:>3} {:>8} {:>8}", "variant", "k", "gen avg", "ext avg");
    for r in &rows {
        println!(
            "{:<16} {:>3} {:>8.4} {:>8.4}",
            r.variant.to_string(),
            r.k,
            r.report.mean_generated.avg_f1(),
            r.report.mean_extracted.avg_f1()
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_ablation_csv(&path, &rows)?;
        println!("wrote {path}");
    }
    Ok(())
}
