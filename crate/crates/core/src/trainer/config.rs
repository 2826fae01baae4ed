use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::extractor::OracleOrder;
use crate::generator::WeightMode;
use crate::losses::LossWeights;
use crate::model::ModelDims;

/// How X_K is chosen for a training document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainSelection {
    /// Oracle snippets topped up with the extractor's best.
    #[default]
    Hybrid,
    /// Extractor top-K, as at test time.
    TopK,
    /// Oracle snippets only.
    Oracle,
}

impl FromStr for TrainSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(TrainSelection::Hybrid),
            "topk" => Ok(TrainSelection::TopK),
            "oracle" => Ok(TrainSelection::Oracle),
            other => Err(Error::Config(format!("selection must be hybrid|topk|oracle, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for TrainSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainSelection::Hybrid => "hybrid",
            TrainSelection::TopK => "topk",
            TrainSelection::Oracle => "oracle",
        })
    }
}

/// Training configuration. Every field is settable from a `key=value` file
/// under the same name; `hybrid = true|false` is shorthand for
/// `selection = hybrid|topk`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub token_budget: usize,
    pub weights: LossWeights,
    pub epochs: usize,
    /// Documents evaluated per worker task inside an accumulation window.
    pub batch_size: usize,
    /// Documents per optimizer step.
    pub grad_accum: usize,
    pub seed: u64,
    pub selection: TrainSelection,
    pub weight_mode: WeightMode,
    pub dims: ModelDims,
    pub lr: f64,
    pub min_count: usize,
    /// Greedy oracle size cap; 0 means 2·K.
    pub oracle_budget: usize,
    pub max_len: usize,
    pub first_k_order: OracleOrder,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 4,
            token_budget: 64,
            weights: LossWeights::default(),
            epochs: 30,
            batch_size: 1,
            grad_accum: 8,
            seed: 0,
            selection: TrainSelection::Hybrid,
            weight_mode: WeightMode::Dynamic,
            dims: ModelDims::default(),
            lr: 1e-3,
            min_count: 1,
            oracle_budget: 0,
            max_len: 32,
            first_k_order: OracleOrder::Selection,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

pub const CONFIG_KEYS: [&str; 20] = [
    "k",
    "token_budget",
    "lambda_g",
    "lambda_o",
    "lambda_c",
    "epochs",
    "batch_size",
    "grad_accum",
    "seed",
    "hybrid",
    "selection",
    "weight_mode",
    "embed_dim",
    "hidden_dim",
    "head_dim",
    "lr",
    "min_count",
    "oracle_budget",
    "max_len",
    "first_k_order",
];

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "k" => self.k = parse(key, value)?,
            "token_budget" => self.token_budget = parse(key, value)?,
            "lambda_g" => self.weights.lambda_g = parse(key, value)?,
            "lambda_o" => self.weights.lambda_o = parse(key, value)?,
            "lambda_c" => self.weights.lambda_c = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "grad_accum" => self.grad_accum = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hybrid" => {
                self.selection = if parse::<bool>(key, value)? {
                    TrainSelection::Hybrid
                } else {
                    TrainSelection::TopK
                }
            }
            "selection" => self.selection = value.parse()?,
            "weight_mode" => self.weight_mode = value.parse()?,
            "embed_dim" => self.dims.embed_dim = parse(key, value)?,
            "hidden_dim" => self.dims.hidden_dim = parse(key, value)?,
            "head_dim" => self.dims.head_dim = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "oracle_budget" => self.oracle_budget = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "first_k_order" => {
                self.first_k_order = match value {
                    "selection" => OracleOrder::Selection,
                    "document" => OracleOrder::Document,
                    other => return Err(Error::Config(format!("first_k_order must be selection|document, got {other:?}"))),
                }
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        if self.k == 0 || self.grad_accum == 0 || self.batch_size == 0 || self.token_budget == 0 {
            return Err(Error::Config("k, grad_accum, batch_size and token_budget must be ≥ 1".into()));
        }
        if d.embed_dim == 0 || d.hidden_dim == 0 || d.head_dim == 0 || self.max_len == 0 {
            return Err(Error::Config("model dims and max_len must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        self.weights.validate()
    }

    pub fn effective_oracle_budget(&self) -> usize {
        if self.oracle_budget == 0 {
            2 * self.k
        } else {
            self.oracle_budget
        }
    }

    /// Canonical `key=value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let order = match self.first_k_order {
            OracleOrder::Selection => "selection",
            OracleOrder::Document => "document",
        };
        let pairs: [(&str, String); 19] = [
            ("k", self.k.to_string()),
            ("token_budget", self.token_budget.to_string()),
            ("lambda_g", self.weights.lambda_g.to_string()),
            ("lambda_o", self.weights.lambda_o.to_string()),
            ("lambda_c", self.weights.lambda_c.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("grad_accum", self.grad_accum.to_string()),
            ("seed", self.seed.to_string()),
            ("selection", self.selection.to_string()),
            ("weight_mode", self.weight_mode.to_string()),
            ("embed_dim", self.dims.embed_dim.to_string()),
            ("hidden_dim", self.dims.hidden_dim.to_string()),
            ("head_dim", self.dims.head_dim.to_string()),
            ("lr", self.lr.to_string()),
            ("min_count", self.min_count.to_string()),
            ("oracle_budget", self.oracle_budget.to_string()),
            ("max_len", self.max_len.to_string()),
            ("first_k_order", order.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
