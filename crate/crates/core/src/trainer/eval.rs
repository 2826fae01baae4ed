use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{DocInput, Document};
use crate::error::{Error, Result};
use crate::extractor::{extracted_text, extractor_distribution, hybrid_select, top_k, ExtractionResult};
use crate::generator::{GenInput, GeneratedSummary, WeightMode};
use crate::metrics::{RougeReport, TokenSeq};
use crate::model::Model;
use crate::oracle::OracleSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub extraction: ExtractionResult,
    pub summary: GeneratedSummary,
    /// Decoded summary tokens, without BOS/EOS.
    pub text: TokenSeq,
}

/// Test-time inference: extractor top-K, then greedy decoding. Sees only
/// the query and snippets.
pub fn predict(model: &Model, input: DocInput<'_>, k: usize, mode: WeightMode, max_len: usize) -> Result<Prediction> {
    let scores = model.score(input)?;
    let selection = top_k(scores.values(), k);
    predict_with_selection(model, input, selection, scores.values(), mode, max_len)
}

/// Decoding from a given X_K. `scores` supplies the static-mode weights.
pub fn predict_with_selection(
    model: &Model,
    input: DocInput<'_>,
    selection: ExtractionResult,
    scores: &[f64],
    mode: WeightMode,
    max_len: usize,
) -> Result<Prediction> {
    let (query, snippets) = model.encode_snippets(input, &selection.indices);
    let gen_input = GenInput {
        query: &query,
        snippets: snippets.iter().map(Vec::as_slice).collect(),
    };
    let static_weights = extractor_distribution(scores, &selection.indices);
    let summary = model
        .generator
        .generate(&model.params, &gen_input, max_len, mode, Some(&static_weights))?;
    let text = model.vocab.decode(&summary.token_ids);
    Ok(Prediction {
        extraction: selection,
        summary,
        text,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub id: String,
    /// Document-order concatenation of X_K against the gold summary.
    pub extracted: RougeReport,
    pub generated: RougeReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_extracted: RougeReport,
    pub mean_generated: RougeReport,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Self {
        let mean_extracted = RougeReport::mean(rows.iter().map(|r| &r.extracted));
        let mean_generated = RougeReport::mean(rows.iter().map(|r| &r.generated));
        EvalReport {
            rows,
            mean_extracted,
            mean_generated,
        }
    }

    /// One line per document and source plus two `mean` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,source,r1_p,r1_r,r1_f,r2_p,r2_r,r2_f,rl_p,rl_r,rl_f\n");
        let mut line = |id: &str, source: &str, r: &RougeReport| {
            let _ = write!(s, "{id},{source}");
            for p in [r.rouge1, r.rouge2, r.rouge_l] {
                let _ = write!(s, ",{:.6},{:.6},{:.6}", p.precision, p.recall, p.f1);
            }
            s.push('\n');
        };
        for row in &self.rows {
            line(&row.id, "extracted", &row.extracted);
            line(&row.id, "generated", &row.generated);
        }
        line("mean", "extracted", &self.mean_extracted);
        line("mean", "generated", &self.mean_generated);
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn score_row(doc: &Document, p: &Prediction) -> EvalRow {
    let extracted = extracted_text(&doc.snippets, &p.extraction);
    EvalRow {
        id: doc.id.clone(),
        extracted: RougeReport::compute(&extracted, &doc.gold, true),
        generated: RougeReport::compute(&p.text, &doc.gold, true),
    }
}

/// Scores test-time predictions against the gold summaries.
pub fn evaluate(model: &Model, docs: &[Document], k: usize, mode: WeightMode, max_len: usize) -> Result<EvalReport> {
    let rows = docs
        .par_iter()
        .map(|doc| predict(model, doc.input(), k, mode, max_len).map(|p| score_row(doc, &p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}

/// Like [`evaluate`] but X_K is the oracle topped up with the extractor's
/// best snippets, as during hybrid training.
pub fn evaluate_oracle_fed(
    model: &Model,
    docs: &[Document],
    oracles: &[OracleSet],
    k: usize,
    mode: WeightMode,
    max_len: usize,
) -> Result<EvalReport> {
    if oracles.len() != docs.len() {
        return Err(Error::Config(format!("{} oracles for {} documents", oracles.len(), docs.len())));
    }
    let rows = docs
        .par_iter()
        .zip(oracles)
        .map(|(doc, oracle)| {
            let scores = model.score(doc.input())?;
            let selection = hybrid_select(oracle, scores.values(), k);
            predict_with_selection(model, doc.input(), selection, scores.values(), mode, max_len).map(|p| score_row(doc, &p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}

/// Sentence-split ROUGE of aligned candidate/reference pairs.
pub fn score_summaries(candidates: &[TokenSeq], references: &[TokenSeq]) -> Result<Vec<RougeReport>> {
    if candidates.len() != references.len() {
        return Err(Error::Config(format!(
            "{} candidates for {} references",
            candidates.len(),
            references.len()
        )));
    }
    Ok(candidates
        .iter()
        .zip(references)
        .map(|(c, r)| RougeReport::compute(c, r, true))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, synth_corpus};
    use crate::model::ModelDims;

    fn model(docs: &[Document]) -> Model {
        let dims = ModelDims {
            embed_dim: 6,
            hidden_dim: 8,
            head_dim: 4,
        };
        Model::new(build_vocab(docs, 1), dims, 32, 5).unwrap()
    }

    #[test]
    fn gold_fed_back_scores_one() {
        let docs = synth_corpus(1, 3, 5, 2).unwrap();
        let golds: Vec<TokenSeq> = docs.iter().map(|d| d.gold.clone()).collect();
        for r in score_summaries(&golds, &golds).unwrap() {
            assert_eq!((r.rouge1.f1, r.rouge2.f1, r.rouge_l.f1), (1.0, 1.0, 1.0));
        }
        assert!(score_summaries(&golds[..1], &golds).is_err());
    }

    #[test]
    fn means_are_row_means() {
        let docs = synth_corpus(2, 4, 6, 2).unwrap();
        let m = model(&docs);
        let report = evaluate(&m, &docs, 2, WeightMode::Dynamic, 6).unwrap();
        assert_eq!(report.rows.len(), 4);
        let r1: f64 = report.rows.iter().map(|r| r.generated.rouge1.f1).sum::<f64>() / 4.0;
        assert!((report.mean_generated.rouge1.f1 - r1).abs() < 1e-15);
        assert_eq!(report.to_csv().lines().count(), 1 + 2 * 4 + 2);
    }

    #[test]
    fn prediction_uses_top_k_and_respects_max_len() {
        let docs = synth_corpus(3, 1, 6, 2).unwrap();
        let m = model(&docs);
        let p = predict(&m, docs[0].input(), 3, WeightMode::Static, 4).unwrap();
        assert_eq!(p.extraction.indices.len(), 3);
        assert!(p.summary.token_ids.len() <= 4);
        assert_eq!(p.summary.weight_matrix.rows(), 3);
    }
}
