//! Generation, consistency and oracle losses and their weighted sum.
//!
//! Gradient routing: the generation loss reaches generator parameters only;
//! the consistency and oracle losses reach extractor parameters only. The
//! graph builders enforce this with `stop_gradient` on every quantity that
//! crosses between the two parameter groups.

use crate::error::{Error, Result};
use crate::generator::{StepNodes, StepOutput};
use crate::neural::{Graph, NodeId, Tensor};
use crate::oracle::OracleSet;

/// Floor inside the marginal-likelihood log.
pub const GEN_PROB_FLOOR: f64 = 1e-300;
/// Floor applied to both distributions of the consistency KL.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_g: f64,
    pub lambda_o: f64,
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_g: 1.0,
            lambda_o: 1.0,
            lambda_c: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_g, self.lambda_o, self.lambda_c];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || all.iter().all(|l| *l == 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative with at least one positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub gen: f64,
    pub oracle: f64,
    pub consistency: f64,
    pub total: f64,
}

/// `−Σ_t log Σ_x w_t[x]·P_t[x][target_t]`.
pub fn generation_loss(steps: &[StepOutput], targets: &[usize]) -> f64 {
    assert_eq!(steps.len(), targets.len(), "one target per step");
    let mut loss = 0.0;
    for (step, &y) in steps.iter().zip(targets) {
        let p: f64 = step
            .dynamic_weights
            .iter()
            .zip(&step.per_snippet_dists)
            .map(|(w, d)| w * d[y])
            .sum();
        if p < GEN_PROB_FLOOR {
            log::warn!("marginal gold probability {p:e} clamped");
        }
        loss -= p.max(GEN_PROB_FLOOR).ln();
    }
    loss
}

fn floored(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| v.max(KL_FLOOR)).collect()
}

/// Time-averaged dynamic weights.
pub fn averaged_weights(steps: &[StepOutput]) -> Vec<f64> {
    let k = steps.first().map_or(0, |s| s.dynamic_weights.len());
    let mut avg = vec![0.0; k];
    for s in steps {
        for (a, w) in avg.iter_mut().zip(&s.dynamic_weights) {
            *a += w;
        }
    }
    for a in &mut avg {
        *a /= steps.len() as f64;
    }
    avg
}

/// `KL(p ‖ q)` with both sides floored.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let (p, q) = (floored(p), floored(q));
    p.iter().zip(&q).map(|(a, b)| a * (a.ln() - b.ln())).sum()
}

/// `KL(avg_t w_t ‖ extractor_probs)`.
pub fn consistency_loss(steps: &[StepOutput], extractor_probs: &[f64]) -> f64 {
    kl_divergence(&averaged_weights(steps), extractor_probs)
}

/// Mean negative log-softmax (over all L scores) of the oracle snippets;
/// 0 for an empty oracle.
pub fn oracle_loss(scores: &[f64], oracle: &OracleSet) -> f64 {
    if oracle.is_empty() {
        return 0.0;
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    oracle.indices.iter().map(|&i| lse - scores[i]).sum::<f64>() / oracle.len() as f64
}

pub fn total_loss(gen: f64, oracle: f64, consistency: f64, w: &LossWeights) -> LossReport {
    LossReport {
        gen,
        oracle,
        consistency,
        total: w.lambda_g * gen + w.lambda_o * oracle + w.lambda_c * consistency,
    }
}

/// Generation loss node. Gradients flow into the generator through the
/// per-snippet distributions and (dynamic mode) the weight logits.
pub fn generation_loss_node(g: &mut Graph, steps: &[StepNodes], targets: &[usize]) -> Result<NodeId> {
    if steps.len() != targets.len() || steps.is_empty() {
        return Err(Error::shape("generation_loss", format!("{} steps, {} targets", steps.len(), targets.len())));
    }
    let mut terms = Vec::with_capacity(steps.len());
    for (step, &y) in steps.iter().zip(targets) {
        let picks = step.dists.iter().map(|&d| g.gather(d, y)).collect::<Result<Vec<_>>>()?;
        let picks = g.concat(&picks)?;
        let p = g.matmul(step.weights, picks)?;
        terms.push(g.log(p, GEN_PROB_FLOOR)?);
    }
    let logs = g.concat(&terms)?;
    let s = g.sum(logs)?;
    g.scale(s, -1.0)
}

/// Consistency loss node. The averaged dynamic weights enter as a
/// stop-gradient target, so only the extractor scores receive gradient.
pub fn consistency_loss_node(g: &mut Graph, steps: &[StepNodes], subset_scores: &[NodeId]) -> Result<NodeId> {
    if steps.is_empty() || subset_scores.is_empty() {
        return Err(Error::shape("consistency_loss", "empty steps or subset"));
    }
    let rows: Vec<NodeId> = steps.iter().map(|s| s.weights).collect();
    let stacked = g.stack(&rows)?;
    let avg = g.mean_rows(stacked)?;
    let target = g.stop_gradient(avg)?;

    let p = floored(g.value(target).data());
    let entropy_term: f64 = p.iter().map(|a| a * a.ln()).sum();
    let p_node = g.constant(Tensor::vector(p))?;

    let scores = g.concat(subset_scores)?;
    let q = g.softmax(scores)?;
    let log_q = g.log(q, KL_FLOOR)?;
    let cross = g.matmul(p_node, log_q)?;
    let c = g.constant(Tensor::scalar(entropy_term))?;
    g.sub(c, cross)
}

/// Oracle loss node over the scores of all L snippets.
pub fn oracle_loss_node(g: &mut Graph, all_scores: &[NodeId], oracle: &OracleSet) -> Result<NodeId> {
    if oracle.is_empty() {
        log::info!("empty oracle set; oracle loss is 0");
        return g.constant(Tensor::scalar(0.0));
    }
    let scores = g.concat(all_scores)?;
    let ls = g.log_softmax(scores)?;
    let picks = oracle.indices.iter().map(|&i| g.gather(ls, i)).collect::<Result<Vec<_>>>()?;
    let picks = g.concat(&picks)?;
    let m = g.mean(picks)?;
    g.scale(m, -1.0)
}

/// Loss component nodes and their weighted total.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub gen: NodeId,
    pub oracle: NodeId,
    pub consistency: NodeId,
    pub total: NodeId,
}

impl LossNodes {
    pub fn report(&self, g: &Graph) -> LossReport {
        LossReport {
            gen: g.scalar(self.gen),
            oracle: g.scalar(self.oracle),
            consistency: g.scalar(self.consistency),
            total: g.scalar(self.total),
        }
    }
}

pub fn total_loss_node(g: &mut Graph, gen: NodeId, oracle: NodeId, consistency: NodeId, w: &LossWeights) -> Result<LossNodes> {
    let a = g.scale(gen, w.lambda_g)?;
    let b = g.scale(oracle, w.lambda_o)?;
    let c = g.scale(consistency, w.lambda_c)?;
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    Ok(LossNodes {
        gen,
        oracle,
        consistency,
        total,
    })
}
