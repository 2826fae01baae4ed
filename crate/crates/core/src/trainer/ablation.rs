use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::config::{TrainConfig, TrainSelection};
use super::eval::{evaluate, EvalReport};
use super::{compute_oracles, train_with_oracles};
use crate::corpus::Document;
use crate::error::{Error, Result};

/// One row of an ablation or K-sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Oracle-only X_K during training.
    NoHybrid,
    /// λ_c = 0.
    NoConsistency,
    /// λ_o = 0.
    NoOracle,
    K(usize),
}

impl Variant {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match *self {
            Variant::Full => {}
            Variant::NoHybrid => c.selection = TrainSelection::Oracle,
            Variant::NoConsistency => c.weights.lambda_c = 0.0,
            Variant::NoOracle => c.weights.lambda_o = 0.0,
            Variant::K(k) => c.k = k,
        }
        c
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Variant::Full),
            "no_hybrid" => Ok(Variant::NoHybrid),
            "no_consistency" => Ok(Variant::NoConsistency),
            "no_oracle" => Ok(Variant::NoOracle),
            other => other
                .strip_prefix("k=")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .map(Variant::K)
                .ok_or_else(|| Error::Config(format!("unknown ablation variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Full => f.write_str("full"),
            Variant::NoHybrid => f.write_str("no_hybrid"),
            Variant::NoConsistency => f.write_str("no_consistency"),
            Variant::NoOracle => f.write_str("no_oracle"),
            Variant::K(k) => write!(f, "k={k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub k: usize,
    pub report: EvalReport,
}

/// Trains every variant from the same seed on `train_docs` and evaluates on
/// `test_docs` with test-time top-K.
pub fn run_ablation(
    base: &TrainConfig,
    train_docs: &[Document],
    test_docs: &[Document],
    variants: &[Variant],
) -> Result<Vec<AblationRow>> {
    base.validate()?;
    let mut rows = Vec::with_capacity(variants.len());
    let mut oracle_cache: Vec<(usize, Vec<crate::oracle::OracleSet>)> = Vec::new();
    for v in variants {
        let config = v.apply(base);
        let budget = config.effective_oracle_budget();
        if !oracle_cache.iter().any(|(b, _)| *b == budget) {
            oracle_cache.push((budget, compute_oracles(train_docs, budget)));
        }
        let oracles = &oracle_cache.iter().find(|(b, _)| *b == budget).expect("cached").1;
        let out = train_with_oracles(&config, train_docs, oracles)?;
        let report = evaluate(&out.model, test_docs, config.k, config.weight_mode, config.max_len)?;
        log::info!("{v}: generated avg F1 {:.4}", report.mean_generated.avg_f1());
        rows.push(AblationRow {
            variant: *v,
            k: config.k,
            report,
        });
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant,k,gen_r1,gen_r2,gen_rl,gen_avg,ext_r1,ext_r2,ext_rl,ext_avg\n");
    for r in rows {
        let (g, e) = (&r.report.mean_generated, &r.report.mean_extracted);
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.variant,
            r.k,
            g.rouge1.f1,
            g.rouge2.f1,
            g.rouge_l.f1,
            g.avg_f1(),
            e.rouge1.f1,
            e.rouge2.f1,
            e.rouge_l.f1,
            e.avg_f1()
        );
    }
    s
}

pub fn write_ablation_csv(path: impl AsRef<Path>, rows: &[AblationRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ablation_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["full", "no_hybrid", "no_consistency", "no_oracle", "k=3"] {
            assert_eq!(s.parse::<Variant>().unwrap().to_string(), s);
        }
        assert!("k=0".parse::<Variant>().is_err());
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn variants_edit_the_config() {
        let base = TrainConfig::default();
        assert_eq!(Variant::NoOracle.apply(&base).weights.lambda_o, 0.0);
        assert_eq!(Variant::NoConsistency.apply(&base).weights.lambda_c, 0.0);
        assert_eq!(Variant::NoHybrid.apply(&base).selection, TrainSelection::Oracle);
        assert_eq!(Variant::K(2).apply(&base).k, 2);
        assert_eq!(Variant::Full.apply(&base), base);
    }
}
