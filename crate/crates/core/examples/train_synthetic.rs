//! Trains on a synthetic keyword corpus and reports what the model learned.
//!
//!     cargo run --release --example train_synthetic -- [seed] [docs=N] [key=value ...]

use std::time::Instant;

use dyle::corpus::synth_corpus;
use dyle::generator::WeightMode;
use dyle::trainer::{
    compute_oracles, evaluate, evaluate_oracle_fed, predict, random_summary_weights, train_with_oracles, TrainConfig,
};

fn main() -> dyle::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let mut config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mut n_docs = 256;
    for kv in args {
        let (k, v) = kv.split_once('=').expect("key=value");
        match k {
            "docs" => n_docs = v.parse().expect("docs"),
            _ => config.set(k, v)?,
        }
    }
    config.validate()?;

    let train_docs = synth_corpus(seed, n_docs, 12, 3)?;
    let test_docs = synth_corpus(seed + 1000, 64, 12, 3)?;
    let oracles = compute_oracles(&train_docs, config.effective_oracle_budget());

    let start = Instant::now();
    let out = train_with_oracles(&config, &train_docs, &oracles)?;
    let per_epoch = train_docs.len().div_ceil(config.grad_accum);
    let first = out.log.first().map_or(f64::NAN, |r| r.gen);
    let last_epoch = &out.log[out.log.len().saturating_sub(per_epoch)..];
    let last = last_epoch.iter().map(|r| r.gen).sum::<f64>() / last_epoch.len() as f64;
    println!(
        "trained {} steps in {:.1?}; gen loss {first:.3} -> {last:.3} ({:.1}%)",
        out.log.len(),
        start.elapsed(),
        100.0 * last / first
    );

    let model = &out.model;
    let report = evaluate(model, &test_docs, config.k, WeightMode::Dynamic, config.max_len)?;
    let test_oracles = compute_oracles(&test_docs, config.effective_oracle_budget());
    let fed = evaluate_oracle_fed(model, &test_docs, &test_oracles, config.k, WeightMode::Dynamic, config.max_len)?;
    println!(
        "test R1 recall: extracted {:.3}, generated {:.3}",
        report.mean_extracted.rouge1.recall, report.mean_generated.rouge1.recall
    );
    println!(
        "avg ROUGE F1: extractor-fed {:.4}, oracle-fed {:.4}",
        report.mean_generated.avg_f1(),
        fed.mean_generated.avg_f1()
    );

    let (mut decoded, mut random) = (0.0, 0.0);
    for (i, doc) in test_docs.iter().enumerate() {
        let p = predict(model, doc.input(), config.k, WeightMode::Dynamic, config.max_len)?;
        decoded += p.summary.weight_matrix.mean_column_entropy();
        random += random_summary_weights(model, &test_docs, i, config.k, seed + i as u64)?
            .1
            .mean_column_entropy();
    }
    let n = test_docs.len() as f64;
    println!("mean column entropy: decoded {:.4}, random summary {:.4}", decoded / n, random / n);

    let doc = &test_docs[0];
    let p = predict(model, doc.input(), config.k, WeightMode::Dynamic, config.max_len)?;
    println!("gold:      {}", doc.gold.to_text());
    println!("generated: {}", p.text.to_text());
    Ok(())
}
