//! Documents, JSONL corpus I/O, chunking, vocabulary, and the synthetic
//! corpus generator used for desk-scale experiments.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{tokenize, TokenSeq};

/// One training or evaluation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    /// Empty for datasets without queries.
    pub query: TokenSeq,
    pub snippets: Vec<TokenSeq>,
    pub gold: TokenSeq,
}

/// The model-visible part of a document. Holds no reference to the gold
/// summary, so anything that takes only a `DocInput` cannot peek at it.
#[derive(Debug, Clone, Copy)]
pub struct DocInput<'a> {
    pub query: &'a TokenSeq,
    pub snippets: &'a [TokenSeq],
}

impl Document {
    pub fn new(id: impl Into<String>, query: TokenSeq, snippets: Vec<TokenSeq>, gold: TokenSeq) -> Result<Self> {
        let id = id.into();
        if snippets.is_empty() {
            return Err(Error::Document {
                id,
                message: "empty snippets list".into(),
            });
        }
        if let Some(i) = snippets.iter().position(|s| s.is_empty()) {
            return Err(Error::Document {
                id,
                message: format!("snippet {i} has no tokens"),
            });
        }
        Ok(Document {
            id,
            query,
            snippets,
            gold,
        })
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn input(&self) -> DocInput<'_> {
        DocInput {
            query: &self.query,
            snippets: &self.snippets,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    query: String,
    snippets: Vec<String>,
    summary: String,
}

fn parse_record(text: &str, line: usize) -> Result<Document> {
    let rec: Record = serde_json::from_str(text).map_err(|e| Error::CorpusLine {
        line,
        message: e.to_string(),
    })?;
    Document::new(
        rec.id,
        tokenize(&rec.query),
        rec.snippets.iter().map(|s| tokenize(s)).collect(),
        tokenize(&rec.summary),
    )
}

/// Reads a JSON Lines corpus. Blank lines are skipped; line numbers are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(parse_record(&line, i + 1)?);
    }
    Ok(docs)
}

pub fn parse_corpus(text: &str) -> Result<Vec<Document>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(l, i + 1))
        .collect()
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        let rec = Record {
            id: d.id.clone(),
            query: d.query.to_text(),
            snippets: d.snippets.iter().map(TokenSeq::to_text).collect(),
            summary: d.gold.to_text(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A run of consecutive snippets encoded together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub snippet_range: Range<usize>,
    pub token_budget: usize,
}

/// Greedy left-to-right packing of snippets into chunks of at most
/// `token_budget` tokens. A snippet longer than the budget gets its own chunk.
pub fn chunk_snippets(snippets: &[TokenSeq], token_budget: usize) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut used = 0;
    for (i, s) in snippets.iter().enumerate() {
        if i > start && used + s.len() > token_budget {
            chunks.push(Chunk {
                snippet_range: start..i,
                token_budget,
            });
            start = i;
            used = 0;
        }
        used += s.len();
    }
    if start < snippets.len() {
        chunks.push(Chunk {
            snippet_range: start..snippets.len(),
            token_budget,
        });
    }
    chunks
}

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SEP: usize = 4;
pub const RESERVED: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<unk>", "<sep>"];

/// Token ↔ id mapping with ids 0–4 reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds from the non-reserved tokens in id order (ids start at 5).
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::VocabMismatch(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Non-reserved tokens in id order.
    pub fn entries(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// BOS + tokens + EOS.
    pub fn encode_target(&self, tokens: &[String]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        ids.extend(tokens.iter().map(|t| self.id(t)));
        ids.push(EOS);
        ids
    }

    /// Maps ids back to tokens, dropping PAD/BOS/EOS.
    pub fn decode(&self, ids: &[usize]) -> TokenSeq {
        TokenSeq::new(
            ids.iter()
                .filter(|&&i| !matches!(i, PAD | BOS | EOS))
                .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]).to_string()),
        )
    }
}

/// Vocabulary of every token with frequency ≥ `min_count`, ordered by
/// (frequency desc, token asc).
pub fn build_vocab(docs: &[Document], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let all = d.query.iter().chain(d.snippets.iter().flat_map(|s| s.iter())).chain(d.gold.iter());
        for t in all {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocab::from_tokens(kept.into_iter().map(|(t, _)| t.to_string())).expect("counted tokens are unique")
}

const KEYWORDS: [&str; 40] = [
    "budget", "audit", "agency", "grant", "tariff", "reactor", "vaccine", "pension", "bridge", "levee",
    "satellite", "harbor", "subsidy", "census", "drought", "pipeline", "treaty", "veteran", "wildfire", "tunnel",
    "airport", "clinic", "school", "railway", "dam", "refinery", "prison", "embassy", "museum", "reservoir",
    "highway", "airbase", "shipyard", "hospital", "library", "courthouse", "observatory", "stadium", "factory", "port",
];

const FILLER: [&str; 40] = [
    "the", "a", "of", "and", "to", "in", "that", "is", "was", "for", "on", "with", "as", "by", "it", "at", "from",
    "this", "be", "or", "which", "an", "were", "are", "has", "had", "also", "been", "would", "their", "more", "other",
    "some", "such", "these", "than", "into", "only", "very", "about",
];

/// Generates `n_docs` documents of `snippet_count` snippets each.
///
/// `salient_count` snippets per document consist of 2–3 distinct keywords;
/// the gold summary is their keywords in document order. The remaining
/// snippets are 4–7 filler words, occasionally with one distractor keyword
/// that never appears in the gold summary.
pub fn synth_corpus(seed: u64, n_docs: usize, snippet_count: usize, salient_count: usize) -> Result<Vec<Document>> {
    if salient_count == 0 || salient_count > snippet_count {
        return Err(Error::Config(format!(
            "salient_count must be in 1..={snippet_count}, got {salient_count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let mut pool: Vec<&str> = KEYWORDS.to_vec();
        pool.shuffle(&mut rng);
        let mut pool = pool.into_iter();

        let mut positions: Vec<usize> = (0..snippet_count).collect();
        positions.shuffle(&mut rng);
        let mut salient: Vec<usize> = positions[..salient_count].to_vec();
        salient.sort_unstable();

        let mut snippets = Vec::with_capacity(snippet_count);
        let mut gold = Vec::new();
        for i in 0..snippet_count {
            if salient.binary_search(&i).is_ok() {
                let n = rng.random_range(2..=3);
                let words: Vec<&str> = pool.by_ref().take(n).collect();
                gold.extend(words.iter().copied());
                snippets.push(TokenSeq::new(words));
            } else {
                let n = rng.random_range(4..=7);
                let mut words: Vec<&str> = (0..n).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
                if rng.random_bool(0.25) {
                    if let Some(k) = pool.next() {
                        let at = rng.random_range(0..=words.len());
                        words.insert(at, k);
                    }
                }
                snippets.push(TokenSeq::new(words));
            }
        }
        docs.push(Document::new(
            format!("synth-{seed}-{d}"),
            TokenSeq::default(),
            snippets,
            TokenSeq::new(gold),
        )?);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::greedy_oracle;

    fn ts(v: &[&str]) -> TokenSeq {
        TokenSeq::new(v.iter().copied())
    }

    #[test]
    fn parse_two_lines() {
        let text = r#"{"id":"a","query":"","snippets":["x y","z"],"summary":"x"}
{"id":"b","query":"what happened?","snippets":["w"],"summary":"w"}"#;
        let docs = parse_corpus(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert!(docs[0].query.is_empty());
        assert_eq!(docs[1].query.tokens(), &["what", "happened", "?"]);
    }

    #[test]
    fn missing_snippets_names_line() {
        let text = "{\"id\":\"a\",\"snippets\":[\"x\"],\"summary\":\"x\"}\n{\"id\":\"b\",\"summary\":\"x\"}";
        match parse_corpus(text) {
            Err(Error::CorpusLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_snippets_names_document() {
        let text = r#"{"id":"doc-9","snippets":[],"summary":"x"}"#;
        match parse_corpus(text) {
            Err(Error::Document { id, .. }) => assert_eq!(id, "doc-9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chunk_examples() {
        let s = vec![ts(&["a", "b", "c"]), ts(&["d", "e", "f"]), ts(&["g", "h", "i"])];
        let ranges: Vec<_> = chunk_snippets(&s, 6).into_iter().map(|c| c.snippet_range).collect();
        assert_eq!(ranges, vec![0..2, 2..3]);

        let ranges: Vec<_> = chunk_snippets(&s, 100).into_iter().map(|c| c.snippet_range).collect();
        assert_eq!(ranges, vec![0..3]);

        let s = vec![ts(&["a"]), ts(&["b", "c", "d", "e"]), ts(&["f"])];
        let ranges: Vec<_> = chunk_snippets(&s, 2).into_iter().map(|c| c.snippet_range).collect();
        assert_eq!(ranges, vec![0..1, 1..2, 2..3]);
    }

    fn doc_with(tokens: &[&str]) -> Document {
        Document::new("d", TokenSeq::default(), vec![ts(tokens)], TokenSeq::default()).unwrap()
    }

    #[test]
    fn vocab_min_count() {
        let docs = vec![doc_with(&["a", "a", "b"])];
        let v = build_vocab(&docs, 1);
        assert_eq!(v.entries(), &["a".to_string(), "b".to_string()]);
        assert_eq!(v.id("a"), 5);

        let v = build_vocab(&docs, 2);
        assert_eq!(v.entries(), &["a".to_string()]);
        assert_eq!(v.id("b"), UNK);
        assert_eq!(build_vocab(&docs, 2), v);
    }

    #[test]
    fn vocab_target_encoding() {
        let v = build_vocab(&[doc_with(&["x", "y"])], 1);
        let ids = v.encode_target(&ts(&["y", "x"]));
        assert_eq!(ids.first(), Some(&BOS));
        assert_eq!(ids.last(), Some(&EOS));
        assert_eq!(v.decode(&ids).tokens(), &["y", "x"]);
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_corpus(7, 5, 10, 3).unwrap();
        let b = synth_corpus(7, 5, 10, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_corpus(8, 5, 10, 3).unwrap());
    }

    #[test]
    fn synth_all_salient_recovered() {
        for d in synth_corpus(3, 4, 5, 5).unwrap() {
            let o = greedy_oracle(&d.snippets, &d.gold, 10);
            assert_eq!(o.sorted_indices(), (0..5).collect::<Vec<_>>());
        }
    }

    #[test]
    fn synth_rejects_bad_salient_count() {
        assert!(synth_corpus(1, 1, 3, 0).is_err());
        assert!(synth_corpus(1, 1, 3, 4).is_err());
    }
}
