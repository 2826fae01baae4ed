//! Extractor + generator bundle with its vocabulary, and the per-document
//! training graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{chunk_snippets, DocInput, Document, Vocab};
use crate::error::{Error, Result};
use crate::extractor::{ExtractionResult, ExtractorNet, SnippetScores};
use crate::generator::{GenInput, GeneratorNet, StepNodes, WeightMode};
use crate::losses::{consistency_loss_node, generation_loss_node, oracle_loss_node, total_loss_node, LossNodes, LossWeights};
use crate::neural::{Checkpoint, Graph, NodeId, ParamStore};
use crate::oracle::OracleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub head_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embed_dim: 32,
            hidden_dim: 64,
            head_dim: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub vocab: Vocab,
    pub params: ParamStore,
    pub extractor: ExtractorNet,
    pub generator: GeneratorNet,
    pub dims: ModelDims,
    pub token_budget: usize,
}

/// Nodes produced by [`Model::build_losses`].
#[derive(Debug)]
pub struct BuiltLosses {
    pub score_nodes: Vec<NodeId>,
    pub selection: ExtractionResult,
    pub steps: Vec<StepNodes>,
    pub losses: LossNodes,
}

/// Everything the training graph produced for one document.
#[derive(Debug)]
pub struct DocGraph {
    pub graph: Graph,
    pub score_nodes: Vec<NodeId>,
    pub selection: ExtractionResult,
    pub steps: Vec<StepNodes>,
    pub losses: LossNodes,
}

fn build_nets(vocab_size: usize, dims: ModelDims, seed: u64) -> Result<(ParamStore, ExtractorNet, GeneratorNet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let extractor = ExtractorNet::new(&mut store, vocab_size, dims.embed_dim, dims.hidden_dim, dims.head_dim, &mut rng)?;
    let generator = GeneratorNet::new(&mut store, vocab_size, dims.embed_dim, dims.hidden_dim, dims.head_dim, &mut rng)?;
    Ok((store, extractor, generator))
}

impl Model {
    pub fn new(vocab: Vocab, dims: ModelDims, token_budget: usize, seed: u64) -> Result<Self> {
        if dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.head_dim == 0 || token_budget == 0 {
            return Err(Error::Config(format!("model dims and token budget must be ≥ 1: {dims:?}, {token_budget}")));
        }
        let (params, extractor, generator) = build_nets(vocab.len(), dims, seed)?;
        Ok(Model {
            vocab,
            params,
            extractor,
            generator,
            dims,
            token_budget,
        })
    }

    /// Rebuilds the architecture and installs checkpointed weights.
    /// Parameter names, order and shapes must match exactly.
    pub fn from_parts(vocab: Vocab, dims: ModelDims, token_budget: usize, params: ParamStore) -> Result<Self> {
        let mut model = Model::new(vocab, dims, token_budget, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for (a, b) in model.params.entries().iter().zip(params.entries()) {
            if a.name != b.name || a.group != b.group {
                return Err(Error::Checkpoint(format!("parameter {} found where {} expected", b.name, a.name)));
            }
            if a.value.shape() != b.value.shape() {
                let embedding = a.name.ends_with(".embedding") || a.name.starts_with("generator.output");
                let msg = format!("{}: shape {:?}, architecture needs {:?}", a.name, b.value.shape(), a.value.shape());
                return Err(if embedding { Error::VocabMismatch(msg) } else { Error::Checkpoint(msg) });
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn checkpoint(&self, config_echo: String, adam: Option<crate::neural::AdamState>) -> Checkpoint {
        Checkpoint {
            config: config_echo,
            vocab: self.vocab.entries().to_vec(),
            params: self.params.clone(),
            adam,
        }
    }

    /// Extractor scores for every snippet.
    pub fn score(&self, input: DocInput<'_>) -> Result<SnippetScores> {
        let chunks = chunk_snippets(input.snippets, self.token_budget);
        crate::extractor::encode_and_score(&self.extractor, &self.params, &self.vocab, input, &chunks)
    }

    pub fn encode_snippets(&self, input: DocInput<'_>, indices: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
        let query = self.vocab.encode(input.query);
        let snippets = indices.iter().map(|&i| self.vocab.encode(&input.snippets[i])).collect();
        (query, snippets)
    }

    /// Full training graph for one document.
    ///
    /// `select` maps extractor score values to the training-time X_K. In
    /// static mode the generator weights are the extractor softmax over X_K
    /// behind a stop-gradient.
    pub fn training_graph(
        &self,
        doc: &Document,
        oracle: &OracleSet,
        weights: &LossWeights,
        mode: WeightMode,
        select: impl Fn(&[f64]) -> ExtractionResult,
    ) -> Result<DocGraph> {
        let mut graph = Graph::new();
        let built = self.build_losses(&mut graph, &self.params, doc, oracle, weights, mode, select)?;
        Ok(DocGraph {
            graph,
            score_nodes: built.score_nodes,
            selection: built.selection,
            steps: built.steps,
            losses: built.losses,
        })
    }

    /// [`Model::training_graph`] on a caller-owned graph with an explicit
    /// parameter store (for finite-difference checks).
    #[allow(clippy::too_many_arguments)]
    pub fn build_losses(
        &self,
        g: &mut Graph,
        params: &ParamStore,
        doc: &Document,
        oracle: &OracleSet,
        weights: &LossWeights,
        mode: WeightMode,
        select: impl Fn(&[f64]) -> ExtractionResult,
    ) -> Result<BuiltLosses> {
        let chunks = chunk_snippets(&doc.snippets, self.token_budget);
        let score_nodes = self.extractor.score_nodes(g, params, &self.vocab, doc.input(), &chunks)?;
        let score_values: Vec<f64> = score_nodes.iter().map(|&n| g.scalar(n)).collect();
        let selection = select(&score_values);

        let subset: Vec<NodeId> = selection.indices.iter().map(|&i| score_nodes[i]).collect();
        let static_weights = match mode {
            WeightMode::Dynamic => None,
            WeightMode::Static => {
                let s = g.concat(&subset)?;
                let p = g.softmax(s)?;
                Some(g.stop_gradient(p)?)
            }
        };

        let (query, snippets) = self.encode_snippets(doc.input(), &selection.indices);
        let input = GenInput {
            query: &query,
            snippets: snippets.iter().map(Vec::as_slice).collect(),
        };
        let target = self.vocab.encode_target(&doc.gold);
        let steps = self.generator.teacher_forced(g, params, &input, &target, static_weights)?;

        let gen = generation_loss_node(g, &steps, &target[1..])?;
        let cons = consistency_loss_node(g, &steps, &subset)?;
        let orc = oracle_loss_node(g, &score_nodes, oracle)?;
        let losses = total_loss_node(g, gen, orc, cons, weights)?;
        Ok(BuiltLosses {
            score_nodes,
            selection,
            steps,
            losses,
        })
    }

    /// Number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.params.num_values()
    }
}
