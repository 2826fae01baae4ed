//! Snippet scoring within chunks, top-K and hybrid selection, and the
//! extractor's softmax over a snippet subset.
//!
//! Selected indices are plain integers computed from score values. Nothing
//! downstream differentiates through the selection.

use rand::Rng;

use crate::corpus::{Chunk, DocInput, Vocab, SEP};
use crate::error::Result;
use crate::metrics::TokenSeq;
use crate::neural::layers::{Gru, ScalarHead};
use crate::neural::{Graph, Group, NodeId, ParamId, ParamStore};
use crate::oracle::OracleSet;

/// One score per snippet.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetScores(pub Vec<f64>);

impl SnippetScores {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionSource {
    ExtractorTopK,
    Hybrid,
    OracleOnly,
}

/// Selected snippets in ascending document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionResult {
    pub indices: Vec<usize>,
    pub source: ExtractionSource,
}

/// How "the first K oracle snippets" are taken when the oracle has at least K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleOrder {
    /// Greedy selection order, highest gain first.
    #[default]
    Selection,
    /// Lowest document index first.
    Document,
}

/// Chunk encoder (embeddings + bidirectional GRU) with a two-layer score head.
#[derive(Debug, Clone)]
pub struct ExtractorNet {
    pub embedding: ParamId,
    forward: Gru,
    backward: Gru,
    head: ScalarHead,
}

impl ExtractorNet {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        head_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let g = Group::Extractor;
        Ok(ExtractorNet {
            embedding: store.add_embedding("extractor.embedding", g, vocab_size, embed_dim, rng)?,
            forward: Gru::new(store, "extractor.gru_fwd", g, embed_dim, hidden_dim, rng)?,
            backward: Gru::new(store, "extractor.gru_bwd", g, embed_dim, hidden_dim, rng)?,
            head: ScalarHead::new(store, "extractor.score", g, 2 * hidden_dim, head_dim, rng)?,
        })
    }

    /// Adds one scalar score node per snippet to `g`, in document order.
    ///
    /// Every chunk is encoded on its own as `query SEP snippets…` (just
    /// `snippets…` when the query is empty); a snippet vector is the mean of
    /// its bidirectional states.
    pub fn score_nodes(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        vocab: &Vocab,
        input: DocInput<'_>,
        chunks: &[Chunk],
    ) -> Result<Vec<NodeId>> {
        let table = g.param(store, self.embedding)?;
        let query_ids = vocab.encode(input.query);
        let mut scores = Vec::with_capacity(input.snippets.len());

        for chunk in chunks {
            let mut ids = query_ids.clone();
            if !ids.is_empty() {
                ids.push(SEP);
            }
            let mut spans = Vec::with_capacity(chunk.snippet_range.len());
            for s in &input.snippets[chunk.snippet_range.clone()] {
                let start = ids.len();
                ids.extend(vocab.encode(s));
                spans.push(start..ids.len());
            }

            let inputs = ids.iter().map(|&id| g.lookup(table, id)).collect::<Result<Vec<_>>>()?;
            let h0 = self.forward.zero_state(g)?;
            let fwd = self.forward.run(g, store, &inputs, h0)?;
            let rev: Vec<NodeId> = inputs.iter().rev().copied().collect();
            let h0 = self.backward.zero_state(g)?;
            let mut bwd = self.backward.run(g, store, &rev, h0)?;
            bwd.reverse();

            for span in spans {
                let rows = span
                    .clone()
                    .map(|p| g.concat(&[fwd[p], bwd[p]]))
                    .collect::<Result<Vec<_>>>()?;
                let m = g.stack(&rows)?;
                let v = g.mean_rows(m)?;
                scores.push(self.head.forward(g, store, v)?);
            }
        }
        Ok(scores)
    }
}

/// Scores every snippet of a document.
pub fn encode_and_score(
    net: &ExtractorNet,
    store: &ParamStore,
    vocab: &Vocab,
    input: DocInput<'_>,
    chunks: &[Chunk],
) -> Result<SnippetScores> {
    let mut g = Graph::new();
    let nodes = net.score_nodes(&mut g, store, vocab, input, chunks)?;
    Ok(SnippetScores(nodes.into_iter().map(|n| g.scalar(n)).collect()))
}

/// Indices sorted by descending score, ties toward the lower index.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// The K highest-scoring snippets (all of them when K ≥ L), ascending.
pub fn top_k(scores: &[f64], k: usize) -> ExtractionResult {
    let mut indices: Vec<usize> = ranking(scores).into_iter().take(k).collect();
    indices.sort_unstable();
    ExtractionResult {
        indices,
        source: ExtractionSource::ExtractorTopK,
    }
}

/// Oracle snippets topped up with the extractor's best non-oracle snippets.
pub fn hybrid_select(oracle: &OracleSet, scores: &[f64], k: usize) -> ExtractionResult {
    hybrid_select_with(oracle, scores, k, OracleOrder::Selection)
}

pub fn hybrid_select_with(oracle: &OracleSet, scores: &[f64], k: usize, order: OracleOrder) -> ExtractionResult {
    let mut indices: Vec<usize> = if oracle.len() >= k {
        match order {
            OracleOrder::Selection => oracle.indices[..k].to_vec(),
            OracleOrder::Document => oracle.sorted_indices()[..k].to_vec(),
        }
    } else {
        let mut chosen = oracle.indices.clone();
        let target = k.min(scores.len());
        for i in ranking(scores) {
            if chosen.len() >= target {
                break;
            }
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        chosen
    };
    indices.sort_unstable();
    ExtractionResult {
        indices,
        source: ExtractionSource::Hybrid,
    }
}

/// Oracle snippets alone, capped at K. Falls back to top-K when the oracle
/// is empty so the generator always has input.
pub fn oracle_only(oracle: &OracleSet, scores: &[f64], k: usize, order: OracleOrder) -> ExtractionResult {
    if oracle.is_empty() {
        return top_k(scores, k);
    }
    let mut indices = match order {
        OracleOrder::Selection => oracle.indices.clone(),
        OracleOrder::Document => oracle.sorted_indices(),
    };
    indices.truncate(k);
    indices.sort_unstable();
    ExtractionResult {
        indices,
        source: ExtractionSource::OracleOnly,
    }
}

/// Softmax of the subset's scores.
pub fn extractor_distribution(scores: &[f64], subset: &[usize]) -> Vec<f64> {
    let vals: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Document-order concatenation of selected snippets.
pub fn extracted_text(snippets: &[TokenSeq], selection: &ExtractionResult) -> TokenSeq {
    TokenSeq::concat(selection.indices.iter().map(|&i| &snippets[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, chunk_snippets, Document};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn oracle(indices: &[usize]) -> OracleSet {
        OracleSet {
            indices: indices.to_vec(),
            score_trajectory: (1..=indices.len()).map(|i| i as f64 * 0.1).collect(),
        }
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k(&[0.1, 0.9, 0.5], 2).indices, vec![1, 2]);
        assert_eq!(top_k(&[0.1, 0.9, 0.5], 5).indices, vec![0, 1, 2]);
        assert_eq!(top_k(&[0.5, 0.5, 0.1], 1).indices, vec![0]);
    }

    #[test]
    fn hybrid_examples() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
        let r = hybrid_select(&oracle(&[3, 7]), &scores, 2);
        assert_eq!(r.indices, vec![3, 7]);
        assert_eq!(r.source, ExtractionSource::Hybrid);

        let r = hybrid_select(&OracleSet::default(), &[0.3, 0.1, 0.9, 0.5], 3);
        assert_eq!(r.indices, top_k(&[0.3, 0.1, 0.9, 0.5], 3).indices);

        // extractor ranking 7, 2, 9, 3, ...
        let mut scores = vec![0.0; 10];
        scores[7] = 4.0;
        scores[2] = 3.0;
        scores[9] = 2.0;
        scores[3] = 1.0;
        let r = hybrid_select(&oracle(&[7, 3]), &scores, 4);
        assert_eq!(r.indices, vec![2, 3, 7, 9]);
    }

    #[test]
    fn hybrid_first_k_order() {
        let scores = vec![0.0; 6];
        let o = oracle(&[5, 1, 3]);
        assert_eq!(hybrid_select_with(&o, &scores, 2, OracleOrder::Selection).indices, vec![1, 5]);
        assert_eq!(hybrid_select_with(&o, &scores, 2, OracleOrder::Document).indices, vec![1, 3]);
    }

    #[test]
    fn oracle_only_selection() {
        let scores = vec![0.2, 0.9, 0.1];
        assert_eq!(oracle_only(&oracle(&[2]), &scores, 2, OracleOrder::Selection).indices, vec![2]);
        let r = oracle_only(&OracleSet::default(), &scores, 1, OracleOrder::Selection);
        assert_eq!(r.indices, vec![1]);
    }

    #[test]
    fn distribution_examples() {
        assert_eq!(extractor_distribution(&[1.0; 4], &[0, 1, 2, 3]), vec![0.25; 4]);
        let d = extractor_distribution(&[2.0, 0.0], &[0, 1]);
        let e2 = 2f64.exp();
        assert!((d[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert!((d[1] - 1.0 / (e2 + 1.0)).abs() < 1e-15);
        assert_eq!(extractor_distribution(&[3.0, -1.0], &[1]), vec![1.0]);
    }

    fn tiny_net(vocab_size: usize) -> (ParamStore, ExtractorNet) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = ExtractorNet::new(&mut store, vocab_size, 6, 5, 4, &mut rng).unwrap();
        (store, net)
    }

    #[test]
    fn duplicate_snippets_in_chunk_position_score_equal() {
        let ts = |v: &[&str]| TokenSeq::new(v.iter().copied());
        // two chunks with identical content
        let doc = Document::new(
            "d",
            TokenSeq::default(),
            vec![ts(&["a", "b"]), ts(&["c"]), ts(&["a", "b"]), ts(&["c"])],
            TokenSeq::default(),
        )
        .unwrap();
        let vocab = build_vocab(std::slice::from_ref(&doc), 1);
        let (store, net) = tiny_net(vocab.len());
        let chunks = chunk_snippets(&doc.snippets, 3);
        assert_eq!(chunks.len(), 2);
        let s = encode_and_score(&net, &store, &vocab, doc.input(), &chunks).unwrap();
        assert_eq!(s.values()[0], s.values()[2]);
        assert_eq!(s.values()[1], s.values()[3]);
    }

    #[test]
    fn chunk_permutation_permutes_scores() {
        let ts = |v: &[&str]| TokenSeq::new(v.iter().copied());
        let a = vec![ts(&["a", "b"]), ts(&["c"]), ts(&["d", "e"]), ts(&["f"])];
        let b = vec![ts(&["d", "e"]), ts(&["f"]), ts(&["a", "b"]), ts(&["c"])];
        let da = Document::new("a", ts(&["q"]), a, TokenSeq::default()).unwrap();
        let db = Document::new("b", ts(&["q"]), b, TokenSeq::default()).unwrap();
        let vocab = build_vocab(std::slice::from_ref(&da), 1);
        let (store, net) = tiny_net(vocab.len());
        let sa = encode_and_score(&net, &store, &vocab, da.input(), &chunk_snippets(&da.snippets, 3)).unwrap();
        let sb = encode_and_score(&net, &store, &vocab, db.input(), &chunk_snippets(&db.snippets, 3)).unwrap();
        assert_eq!(sa.values()[0], sb.values()[2]);
        assert_eq!(sa.values()[3], sb.values()[1]);
        let mut ma = sa.0.clone();
        let mut mb = sb.0.clone();
        ma.sort_by(f64::total_cmp);
        mb.sort_by(f64::total_cmp);
        assert_eq!(ma, mb);
    }

    #[test]
    fn single_snippet_score_is_finite() {
        let ts = |v: &[&str]| TokenSeq::new(v.iter().copied());
        let doc = Document::new("d", TokenSeq::default(), vec![ts(&["x"])], TokenSeq::default()).unwrap();
        let vocab = build_vocab(std::slice::from_ref(&doc), 1);
        let (store, net) = tiny_net(vocab.len());
        let s = encode_and_score(&net, &store, &vocab, doc.input(), &chunk_snippets(&doc.snippets, 64)).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.values()[0].is_finite());
    }
}
