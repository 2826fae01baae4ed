//! Per-snippet decoding with dynamic snippet weights.
//!
//! For each extracted snippet the generator runs an encoder over
//! `query SEP snippet` and a decoder over the summary prefix that attends to
//! that snippet's encoder states. The pre-head state `h = [decoder; context]`
//! feeds both the shared vocabulary head and a separate scalar weight head.
//! The next-token distribution is the weight-averaged mixture of the
//! per-snippet distributions.

use rand::Rng;

use crate::corpus::{BOS, EOS, SEP};
use crate::error::{Error, Result};
use crate::neural::layers::{Gru, Linear, ScalarHead};
use crate::neural::{Graph, Group, NodeId, ParamId, ParamStore, Tensor};

/// Per-step weighting over extracted snippets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Softmax of the weight-head logits, recomputed at every step.
    #[default]
    Dynamic,
    /// A fixed distribution reused at every step.
    Static,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(WeightMode::Dynamic),
            "static" => Ok(WeightMode::Static),
            other => Err(Error::Config(format!("weight mode must be dynamic|static, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::Dynamic => "dynamic",
            WeightMode::Static => "static",
        })
    }
}

/// Values produced at one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// One vocabulary distribution per extracted snippet.
    pub per_snippet_dists: Vec<Vec<f64>>,
    /// Snippet weights used at this step (the static vector in static mode).
    pub dynamic_weights: Vec<f64>,
    /// Weight-head logits, one per snippet.
    pub per_snippet_logits: Vec<f64>,
}

/// Graph handles for one decoding step.
#[derive(Debug, Clone)]
pub struct StepNodes {
    pub dists: Vec<NodeId>,
    pub logits: Vec<NodeId>,
    pub weights: NodeId,
}

impl StepNodes {
    pub fn values(&self, g: &Graph) -> StepOutput {
        StepOutput {
            per_snippet_dists: self.dists.iter().map(|&d| g.value(d).data().to_vec()).collect(),
            dynamic_weights: g.value(self.weights).data().to_vec(),
            per_snippet_logits: self.logits.iter().map(|&l| g.scalar(l)).collect(),
        }
    }
}

/// Snippet-by-step weight matrix: `entries[k][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn from_steps(steps: &[StepOutput]) -> Self {
        let k = steps.first().map_or(0, |s| s.dynamic_weights.len());
        WeightMatrix {
            entries: (0..k).map(|i| steps.iter().map(|s| s.dynamic_weights[i]).collect()).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.entries.iter().map(|r| r[t]).collect()
    }

    /// Mean Shannon entropy (nats) of the columns.
    pub fn mean_column_entropy(&self) -> f64 {
        let t = self.cols();
        if t == 0 {
            return 0.0;
        }
        let total: f64 = (0..t)
            .map(|c| {
                self.column(c)
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| -p * p.ln())
                    .sum::<f64>()
            })
            .sum();
        total / t as f64
    }
}

/// Decoded token ids (without BOS; ends with EOS unless `max_len` was hit)
/// plus the weights used at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSummary {
    pub token_ids: Vec<usize>,
    pub weight_matrix: WeightMatrix,
}

/// Σ_x w[x]·P_x, elementwise.
pub fn marginal_next_token(step: &StepOutput) -> Vec<f64> {
    let v = step.per_snippet_dists.first().map_or(0, Vec::len);
    let mut out = vec![0.0; v];
    for (w, dist) in step.dynamic_weights.iter().zip(&step.per_snippet_dists) {
        for (o, p) in out.iter_mut().zip(dist) {
            *o += w * p;
        }
    }
    out
}

/// Inputs to the generator: the query and each extracted snippet as ids.
#[derive(Debug, Clone)]
pub struct GenInput<'a> {
    pub query: &'a [usize],
    pub snippets: Vec<&'a [usize]>,
}

struct Encoded {
    states: NodeId,
    last: NodeId,
}

/// Generator parameters (the θ group).
#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub embedding: ParamId,
    pub vocab_size: usize,
    encoder: Gru,
    decoder: Gru,
    output: Linear,
    weight_head: ScalarHead,
    hidden: usize,
}

impl GeneratorNet {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        head_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let g = Group::Generator;
        Ok(GeneratorNet {
            embedding: store.add_embedding("generator.embedding", g, vocab_size, embed_dim, rng)?,
            vocab_size,
            encoder: Gru::new(store, "generator.encoder", g, embed_dim, hidden_dim, rng)?,
            decoder: Gru::new(store, "generator.decoder", g, embed_dim, hidden_dim, rng)?,
            output: Linear::new(store, "generator.output", g, 2 * hidden_dim, vocab_size, rng)?,
            weight_head: ScalarHead::new(store, "generator.weight", g, 2 * hidden_dim, head_dim, rng)?,
            hidden: hidden_dim,
        })
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.vocab_size) {
            Some(&id) => Err(Error::OutOfVocab {
                id,
                size: self.vocab_size,
            }),
            None => Ok(()),
        }
    }

    fn encode(&self, g: &mut Graph, store: &ParamStore, query: &[usize], snippet: &[usize]) -> Result<Encoded> {
        let table = g.param(store, self.embedding)?;
        let mut ids = query.to_vec();
        if !ids.is_empty() {
            ids.push(SEP);
        }
        ids.extend_from_slice(snippet);
        let inputs = ids.iter().map(|&i| g.lookup(table, i)).collect::<Result<Vec<_>>>()?;
        let h0 = self.encoder.zero_state(g)?;
        let states = self.encoder.run(g, store, &inputs, h0)?;
        let last = *states.last().ok_or_else(|| Error::shape("encode", "empty snippet"))?;
        Ok(Encoded {
            states: g.stack(&states)?,
            last,
        })
    }

    /// One decoder step for one snippet: returns (new state, distribution, logit).
    fn step(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        enc: &Encoded,
        state: NodeId,
        prev_token: usize,
    ) -> Result<(NodeId, NodeId, NodeId)> {
        let table = g.param(store, self.embedding)?;
        let x = g.lookup(table, prev_token)?;
        let s = self.decoder.step(g, store, x, state)?;
        let att = g.matmul(enc.states, s)?;
        let att = g.scale(att, 1.0 / (self.hidden as f64).sqrt())?;
        let alpha = g.softmax(att)?;
        let ctx = g.matmul(alpha, enc.states)?;
        let h = g.concat(&[s, ctx])?;
        let logits = self.output.forward(g, store, h)?;
        let dist = g.softmax(logits)?;
        let l = self.weight_head.forward(g, store, h)?;
        Ok((s, dist, l))
    }

    /// Teacher-forced pass: step `t` conditions on `target[..=t]`, and
    /// predicts `target[t + 1]`. `target` must start with BOS.
    ///
    /// `static_weights`, when given, replaces the dynamic weights at every step.
    pub fn teacher_forced(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &GenInput<'_>,
        target: &[usize],
        static_weights: Option<NodeId>,
    ) -> Result<Vec<StepNodes>> {
        if input.snippets.is_empty() {
            return Err(Error::shape("teacher_forced", "no extracted snippets"));
        }
        if target.first() != Some(&BOS) || target.len() < 2 {
            return Err(Error::shape("teacher_forced", "target must be BOS … with at least one prediction"));
        }
        self.check_ids(target)?;
        self.check_ids(input.query)?;
        for s in &input.snippets {
            self.check_ids(s)?;
        }

        let encoded = input
            .snippets
            .iter()
            .map(|s| self.encode(g, store, input.query, s))
            .collect::<Result<Vec<_>>>()?;
        let mut states: Vec<NodeId> = encoded.iter().map(|e| e.last).collect();

        let mut steps = Vec::with_capacity(target.len() - 1);
        for &prev in &target[..target.len() - 1] {
            let mut dists = Vec::with_capacity(encoded.len());
            let mut logits = Vec::with_capacity(encoded.len());
            for (enc, state) in encoded.iter().zip(states.iter_mut()) {
                let (s, d, l) = self.step(g, store, enc, *state, prev)?;
                *state = s;
                dists.push(d);
                logits.push(l);
            }
            let weights = match static_weights {
                Some(w) => w,
                None => {
                    let l = g.concat(&logits)?;
                    g.softmax(l)?
                }
            };
            steps.push(StepNodes { dists, logits, weights });
        }
        Ok(steps)
    }

    /// Greedy argmax decoding over the marginal distribution.
    ///
    /// In static mode `static_weights` (length K) is used at every step;
    /// it is ignored in dynamic mode.
    pub fn generate(
        &self,
        store: &ParamStore,
        input: &GenInput<'_>,
        max_len: usize,
        mode: WeightMode,
        static_weights: Option<&[f64]>,
    ) -> Result<GeneratedSummary> {
        if input.snippets.is_empty() {
            return Err(Error::shape("generate", "no extracted snippets"));
        }
        self.check_ids(input.query)?;
        let mut g = Graph::new();
        let fixed = match mode {
            WeightMode::Static => {
                let w = static_weights.ok_or_else(|| Error::Config("static mode needs weights".into()))?;
                if w.len() != input.snippets.len() {
                    return Err(Error::shape("generate", "static weight length differs from K"));
                }
                Some(g.constant(Tensor::vector(w.to_vec()))?)
            }
            WeightMode::Dynamic => None,
        };

        let encoded = input
            .snippets
            .iter()
            .map(|s| self.encode(&mut g, store, input.query, s))
            .collect::<Result<Vec<_>>>()?;
        let mut states: Vec<NodeId> = encoded.iter().map(|e| e.last).collect();

        let mut prev = BOS;
        let mut tokens = Vec::new();
        let mut outputs = Vec::new();
        for _ in 0..max_len.max(1) {
            let mut dists = Vec::with_capacity(encoded.len());
            let mut logits = Vec::with_capacity(encoded.len());
            for (enc, state) in encoded.iter().zip(states.iter_mut()) {
                let (s, d, l) = self.step(&mut g, store, enc, *state, prev)?;
                *state = s;
                dists.push(d);
                logits.push(l);
            }
            let weights = match fixed {
                Some(w) => w,
                None => {
                    let l = g.concat(&logits)?;
                    g.softmax(l)?
                }
            };
            let out = StepNodes { dists, logits, weights }.values(&g);
            let marginal = marginal_next_token(&out);
            let next = argmax(&marginal);
            outputs.push(out);
            tokens.push(next);
            if next == EOS {
                break;
            }
            prev = next;
        }
        Ok(GeneratedSummary {
            token_ids: tokens,
            weight_matrix: WeightMatrix::from_steps(&outputs),
        })
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Step output for the last position of `prefix` (which starts with BOS).
pub fn decode_step(
    net: &GeneratorNet,
    store: &ParamStore,
    input: &GenInput<'_>,
    prefix: &[usize],
) -> Result<StepOutput> {
    if prefix.first() != Some(&BOS) {
        return Err(Error::shape("decode_step", "prefix must start with BOS"));
    }
    // a dummy next token turns the prefix into a teacher-forcing target
    let mut target = prefix.to_vec();
    target.push(EOS);
    let mut g = Graph::new();
    let steps = net.teacher_forced(&mut g, store, input, &target, None)?;
    Ok(steps.last().expect("at least one step").values(&g))
}

/// Teacher-forced step outputs as plain values.
pub fn teacher_forced_forward(
    net: &GeneratorNet,
    store: &ParamStore,
    input: &GenInput<'_>,
    target: &[usize],
) -> Result<Vec<StepOutput>> {
    let mut g = Graph::new();
    let steps = net.teacher_forced(&mut g, store, input, target, None)?;
    Ok(steps.iter().map(|s| s.values(&g)).collect())
}
