//! Training loop, evaluation, ablations and heatmap export.

mod ablation;
mod config;
mod eval;
mod heatmap;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ablation::{run_ablation, write_ablation_csv, AblationRow, Variant};
pub use config::{TrainConfig, TrainSelection, CONFIG_KEYS};
pub use eval::{
    evaluate, evaluate_oracle_fed, predict, predict_with_selection, score_summaries, EvalReport, EvalRow, Prediction,
};
pub use heatmap::{export_heatmap, random_summary_weights, render_svg, weights_csv, HeatmapFiles};

use crate::corpus::{build_vocab, Document, Vocab};
use crate::error::{Error, Result};
use crate::extractor::{hybrid_select_with, oracle_only, top_k, ExtractionResult};
use crate::losses::LossReport;
use crate::model::Model;
use crate::neural::{adam_step, AdamConfig, AdamState, Checkpoint, Grads, GroupFilter};
use crate::oracle::{greedy_oracle, OracleSet};

/// Keeps the shuffle stream apart from the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5eed_5eed;

/// One optimizer step: component losses averaged over its window, measured
/// before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub gen: f64,
    pub oracle: f64,
    pub consistency: f64,
    pub total: f64,
}

pub const LOSS_LOG_HEADER: &str = "step,gen,oracle,consistency,total";

pub fn loss_log_csv(rows: &[LossRow]) -> String {
    let mut s = String::from(LOSS_LOG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.step, r.gen, r.oracle, r.consistency, r.total);
    }
    s
}

pub fn write_loss_log(path: impl AsRef<Path>, rows: &[LossRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, loss_log_csv(rows)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LossRow>,
    pub adam: AdamState,
}

impl TrainOutcome {
    pub fn checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        self.model.checkpoint(config.to_text(), Some(self.adam.clone()))
    }
}

/// Greedy oracles for every document, in corpus order.
pub fn compute_oracles(docs: &[Document], budget: usize) -> Vec<OracleSet> {
    docs.par_iter()
        .map(|d| greedy_oracle(&d.snippets, &d.gold, budget))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct OracleCache {
    key: String,
    oracles: Vec<OracleSet>,
}

/// Hex SHA-256 over the corpus content and the oracle budget.
pub fn corpus_key(docs: &[Document], budget: usize) -> String {
    let mut h = Sha256::new();
    h.update(budget.to_le_bytes());
    for d in docs {
        h.update(d.id.as_bytes());
        h.update([0]);
        for seq in std::iter::once(&d.query).chain(&d.snippets).chain(std::iter::once(&d.gold)) {
            for t in seq.tokens() {
                h.update(t.as_bytes());
                h.update([1]);
            }
            h.update([2]);
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// [`compute_oracles`] backed by a JSON cache file. A cache written for a
/// different corpus or budget is recomputed and overwritten.
pub fn cached_oracles(docs: &[Document], budget: usize, cache: &Path) -> Result<Vec<OracleSet>> {
    let key = corpus_key(docs, budget);
    if let Ok(text) = std::fs::read_to_string(cache) {
        match serde_json::from_str::<OracleCache>(&text) {
            Ok(c) if c.key == key && c.oracles.len() == docs.len() => return Ok(c.oracles),
            Ok(_) => log::info!("oracle cache {} is stale", cache.display()),
            Err(e) => log::warn!("ignoring unreadable oracle cache {}: {e}", cache.display()),
        }
    }
    let oracles = compute_oracles(docs, budget);
    let text = serde_json::to_string(&OracleCache {
        key,
        oracles: oracles.clone(),
    })?;
    std::fs::write(cache, text).map_err(|e| Error::io(cache, e))?;
    Ok(oracles)
}

/// Training-time X_K for the configured selection rule.
pub fn training_selection(config: &TrainConfig, oracle: &OracleSet, scores: &[f64]) -> ExtractionResult {
    match config.selection {
        TrainSelection::Hybrid => hybrid_select_with(oracle, scores, config.k, config.first_k_order),
        TrainSelection::TopK => top_k(scores, config.k),
        TrainSelection::Oracle => oracle_only(oracle, scores, config.k, config.first_k_order),
    }
}

/// Loss components and parameter gradients for one document.
pub fn document_gradients(
    model: &Model,
    config: &TrainConfig,
    doc: &Document,
    oracle: &OracleSet,
) -> Result<(LossReport, Grads)> {
    let non_finite = |e: Error| match e {
        Error::NonFinite { .. } => Error::NonFiniteLoss { id: doc.id.clone() },
        other => other,
    };
    let dg = model
        .training_graph(doc, oracle, &config.weights, config.weight_mode, |s| {
            training_selection(config, oracle, s)
        })
        .map_err(non_finite)?;
    let report = dg.losses.report(&dg.graph);
    if !report.total.is_finite() {
        return Err(Error::NonFiniteLoss { id: doc.id.clone() });
    }
    let grads = dg.graph.backward(dg.losses.total)?.into_param_grads(&model.params);
    if !grads.is_finite() {
        return Err(Error::NonFiniteLoss { id: doc.id.clone() });
    }
    Ok((report, grads))
}

/// Builds the vocabulary, initializes a model from `config.seed`, computes
/// oracles and trains.
pub fn train(config: &TrainConfig, docs: &[Document]) -> Result<TrainOutcome> {
    config.validate()?;
    let oracles = compute_oracles(docs, config.effective_oracle_budget());
    train_with_oracles(config, docs, &oracles)
}

pub fn train_with_oracles(config: &TrainConfig, docs: &[Document], oracles: &[OracleSet]) -> Result<TrainOutcome> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    let vocab = build_vocab(docs, config.min_count);
    let model = Model::new(vocab, config.dims, config.token_budget, config.seed)?;
    train_model(model, config, docs, oracles)
}

/// Runs the optimization loop on an existing model.
///
/// Documents are shuffled each epoch and consumed in windows of
/// `grad_accum`; each window's documents are processed in parallel against
/// the same parameters and their gradients summed in window order, then
/// averaged and applied with one Adam step.
pub fn train_model(mut model: Model, config: &TrainConfig, docs: &[Document], oracles: &[OracleSet]) -> Result<TrainOutcome> {
    config.validate()?;
    if oracles.len() != docs.len() {
        return Err(Error::Config(format!("{} oracles for {} documents", oracles.len(), docs.len())));
    }
    let adam_config = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(&model.params, adam_config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut log = Vec::with_capacity(config.epochs * docs.len().div_ceil(config.grad_accum));

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for window in order.chunks(config.grad_accum) {
            let results: Vec<Result<(LossReport, Grads)>> = window
                .par_iter()
                .with_min_len(config.batch_size)
                .map(|&i| document_gradients(&model, config, &docs[i], &oracles[i]))
                .collect();
            let mut grads = Grads::zeros_like(&model.params);
            let mut sum = LossReport::default();
            for r in results {
                let (report, g) = r?;
                grads.accumulate(&g);
                sum.gen += report.gen;
                sum.oracle += report.oracle;
                sum.consistency += report.consistency;
                sum.total += report.total;
            }
            let n = window.len() as f64;
            grads.scale(1.0 / n);
            adam_step(&mut model.params, &grads, &mut adam, GroupFilter::Both)?;
            log.push(LossRow {
                step: log.len() + 1,
                gen: sum.gen / n,
                oracle: sum.oracle / n,
                consistency: sum.consistency / n,
                total: sum.total / n,
            });
        }
        if let Some(last) = log.last() {
            log::debug!("epoch {} step {} total {:.4}", epoch + 1, last.step, last.total);
        }
    }
    Ok(TrainOutcome { model, log, adam })
}

/// Restores a model and the configuration it was trained with.
pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, TrainConfig)> {
    let ckpt = Checkpoint::load(path)?;
    model_from_checkpoint(ckpt)
}

pub fn model_from_checkpoint(ckpt: Checkpoint) -> Result<(Model, TrainConfig)> {
    let config = TrainConfig::from_text(&ckpt.config)
        .map_err(|e| Error::Checkpoint(format!("bad configuration echo: {e}")))?;
    let vocab = Vocab::from_tokens(ckpt.vocab)?;
    let model = Model::from_parts(vocab, config.dims, config.token_budget, ckpt.params)?;
    Ok((model, config))
}
