//! Extractive oracles: greedy search against the gold summary, plus an
//! exhaustive searcher for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{oracle_score, TokenSeq};

/// Scores closer than this are ties.
pub const SCORE_TOLERANCE: f64 = 1e-12;

pub const EXHAUSTIVE_MAX_SNIPPETS: usize = 12;
pub const EXHAUSTIVE_MAX_SIZE: usize = 4;

/// Selected snippet indices in selection order with the score after each pick.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleSet {
    pub indices: Vec<usize>,
    pub score_trajectory: Vec<f64>,
}

impl OracleSet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn final_score(&self) -> f64 {
        self.score_trajectory.last().copied().unwrap_or(0.0)
    }

    /// Indices in document order.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }
}

/// Document-order concatenation of the chosen snippets.
pub fn concat_in_document_order(snippets: &[TokenSeq], chosen: &[usize]) -> TokenSeq {
    let mut order = chosen.to_vec();
    order.sort_unstable();
    TokenSeq::concat(order.iter().map(|&i| &snippets[i]))
}

fn subset_score(snippets: &[TokenSeq], chosen: &[usize], gold: &TokenSeq) -> f64 {
    oracle_score(&concat_in_document_order(snippets, chosen), gold)
}

/// Greedy oracle search.
///
/// Each round adds the snippet that maximizes the averaged ROUGE F1 of the
/// document-order concatenation; stops at `budget` or when nothing strictly
/// improves. Ties go to the lowest index.
pub fn greedy_oracle(snippets: &[TokenSeq], gold: &TokenSeq, budget: usize) -> OracleSet {
    let mut selected: Vec<usize> = Vec::new();
    let mut trajectory = Vec::new();
    let mut current = 0.0;

    while selected.len() < budget.min(snippets.len()) {
        let scores: Vec<Option<f64>> = (0..snippets.len())
            .into_par_iter()
            .map(|i| {
                if selected.contains(&i) {
                    return None;
                }
                let mut trial = selected.clone();
                trial.push(i);
                Some(subset_score(snippets, &trial, gold))
            })
            .collect();

        // sequential reduction keeps the lowest-index tie rule
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.into_iter().enumerate() {
            if let Some(s) = s {
                match best {
                    Some((_, b)) if s <= b + SCORE_TOLERANCE => {}
                    _ => best = Some((i, s)),
                }
            }
        }

        match best {
            Some((i, s)) if s > current + SCORE_TOLERANCE => {
                selected.push(i);
                trajectory.push(s);
                current = s;
            }
            _ => break,
        }
    }

    OracleSet {
        indices: selected,
        score_trajectory: trajectory,
    }
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if buf.len() == k {
            f(buf);
            return;
        }
        for i in start..n {
            buf.push(i);
            rec(i + 1, n, k, buf, f);
            buf.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Globally optimal subset of size ≤ `max_size`; ties go to the
/// lexicographically smallest index set.
///
/// The returned indices are in document order and the trajectory holds the
/// score of each document-order prefix, so it need not be increasing.
pub fn exhaustive_oracle(snippets: &[TokenSeq], gold: &TokenSeq, max_size: usize) -> Result<OracleSet> {
    if snippets.len() > EXHAUSTIVE_MAX_SNIPPETS || max_size > EXHAUSTIVE_MAX_SIZE {
        return Err(Error::SearchGuard(format!(
            "{} snippets / max_size {} exceeds {} / {}",
            snippets.len(),
            max_size,
            EXHAUSTIVE_MAX_SNIPPETS,
            EXHAUSTIVE_MAX_SIZE
        )));
    }

    let mut best: Vec<usize> = Vec::new();
    let mut best_score = 0.0;
    for size in 1..=max_size.min(snippets.len()) {
        for_each_combination(snippets.len(), size, &mut |set| {
            let s = subset_score(snippets, set, gold);
            let better = s > best_score + SCORE_TOLERANCE
                || ((s - best_score).abs() <= SCORE_TOLERANCE && !best.is_empty() && set < best.as_slice());
            if better {
                best = set.to_vec();
                best_score = s;
            }
        });
    }

    let trajectory = (1..=best.len())
        .map(|k| subset_score(snippets, &best[..k], gold))
        .collect();
    Ok(OracleSet {
        indices: best,
        score_trajectory: trajectory,
    })
}
