//! Tokenization and ROUGE scoring.
//!
//! ROUGE-N uses clipped n-gram overlap. ROUGE-L is either the plain
//! longest-common-subsequence score over whole sequences or, with sentence
//! splitting, the summary-level union-LCS variant with clipped token hits.
//! All F-scores use β = 1.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

/// A lowercase token sequence with no empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Wraps already-split tokens, dropping empty strings.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSeq(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Concatenates sequences in the given order.
    pub fn concat<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenSeq>,
    {
        TokenSeq(parts.into_iter().flat_map(|p| p.0.iter().cloned()).collect())
    }

    /// Space-joined text; re-tokenizes to the same sequence.
    pub fn to_text(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl From<Vec<&str>> for TokenSeq {
    fn from(v: Vec<&str>) -> Self {
        TokenSeq::new(v)
    }
}

/// Lowercases, splits on whitespace and detaches every non-alphanumeric
/// character into a token of its own.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if c.is_alphanumeric() {
                current.extend(c.to_lowercase());
            } else {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(c.to_lowercase().collect());
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    TokenSeq(out)
}

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    /// Builds from a hit count; a zero denominator yields 0 for that side.
    pub fn from_counts(hits: usize, candidate_len: usize, reference_len: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { hits as f64 / den as f64 };
        Prf::new(ratio(candidate_len), ratio(reference_len))
    }

    pub fn mean<'a, I: IntoIterator<Item = &'a Prf>>(items: I) -> Prf {
        let mut n = 0usize;
        let mut acc = Prf::default();
        for p in items {
            n += 1;
            acc.precision += p.precision;
            acc.recall += p.recall;
            acc.f1 += p.f1;
        }
        if n > 0 {
            acc.precision /= n as f64;
            acc.recall /= n as f64;
            acc.f1 /= n as f64;
        }
        acc
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped overlap. Panics if `n == 0`.
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Prf {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| refc.get(gram).map_or(0, |&r| c.min(r)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Prf::from_counts(overlap, cand_total, ref_total)
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Positions in `reference` that participate in one LCS with `candidate`.
fn lcs_reference_positions(reference: &[String], candidate: &[String]) -> Vec<usize> {
    let table = lcs_table(reference, candidate);
    let (mut i, mut j) = (reference.len(), candidate.len());
    let mut positions = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == candidate[j - 1] {
            positions.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    positions.reverse();
    positions
}

/// Splits after sentence-final punctuation tokens.
pub fn split_sentences(tokens: &[String]) -> Vec<&[String]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if matches!(t.as_str(), "." | "!" | "?") {
            out.push(&tokens[start..=i]);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

/// ROUGE-L. With `sentence_split`, computes the summary-level union-LCS score.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq, sentence_split: bool) -> Prf {
    if candidate.is_empty() || reference.is_empty() {
        return Prf::default();
    }
    if !sentence_split {
        let l = lcs_len(candidate, reference);
        return Prf::from_counts(l, candidate.len(), reference.len());
    }

    let cand_sents = split_sentences(candidate);
    let ref_sents = split_sentences(reference);

    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in candidate.iter() {
        *cand_counts.entry(t).or_insert(0) += 1;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference.iter() {
        *ref_counts.entry(t).or_insert(0) += 1;
    }

    let mut hits = 0usize;
    for r in &ref_sents {
        let mut union: Vec<usize> = cand_sents
            .iter()
            .flat_map(|c| lcs_reference_positions(r, c))
            .collect();
        union.sort_unstable();
        union.dedup();
        for pos in union {
            let tok = r[pos].as_str();
            let rc = ref_counts.get_mut(tok).expect("token from reference");
            let cc = cand_counts.entry(tok).or_insert(0);
            if *rc > 0 && *cc > 0 {
                hits += 1;
                *rc -= 1;
                *cc -= 1;
            }
        }
    }
    Prf::from_counts(hits, candidate.len(), reference.len())
}

/// Mean of ROUGE-1, ROUGE-2 and ROUGE-L (no sentence split) F1.
pub fn oracle_score(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let r1 = rouge_n(candidate, reference, 1).f1;
    let r2 = rouge_n(candidate, reference, 2).f1;
    let rl = rouge_l(candidate, reference, false).f1;
    (r1 + r2 + rl) / 3.0
}

/// ROUGE-1/2/L triple.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RougeReport {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
}

impl RougeReport {
    pub fn compute(candidate: &TokenSeq, reference: &TokenSeq, sentence_split: bool) -> Self {
        RougeReport {
            rouge1: rouge_n(candidate, reference, 1),
            rouge2: rouge_n(candidate, reference, 2),
            rouge_l: rouge_l(candidate, reference, sentence_split),
        }
    }

    /// Mean of the three F1 values.
    pub fn avg_f1(&self) -> f64 {
        (self.rouge1.f1 + self.rouge2.f1 + self.rouge_l.f1) / 3.0
    }

    pub fn mean<'a, I: IntoIterator<Item = &'a RougeReport>>(items: I) -> RougeReport {
        let items: Vec<&RougeReport> = items.into_iter().collect();
        RougeReport {
            rouge1: Prf::mean(items.iter().map(|r| &r.rouge1)),
            rouge2: Prf::mean(items.iter().map(|r| &r.rouge2)),
            rouge_l: Prf::mean(items.iter().map(|r| &r.rouge_l)),
        }
    }
}

impl fmt::Display for RougeReport {
    /// Tab-separated `R1-P R1-R R1-F R2-P R2-R R2-F RL-P RL-R RL-F`, 4 decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = [
            self.rouge1.precision,
            self.rouge1.recall,
            self.rouge1.f1,
            self.rouge2.precision,
            self.rouge2.recall,
            self.rouge2.f1,
            self.rouge_l.precision,
            self.rouge_l.recall,
            self.rouge_l.f1,
        ];
        let line: Vec<String> = cols.iter().map(|v| format!("{v:.4}")).collect();
        write!(f, "{}", line.join("\t"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[&str]) -> TokenSeq {
        TokenSeq::new(v.iter().copied())
    }

    #[test]
    fn tokenize_table() {
        let table: [(&str, &[&str]); 10] = [
            ("", &[]),
            ("The cat sat.", &["the", "cat", "sat", "."]),
            ("A  a", &["a", "a"]),
            ("Hello, World!", &["hello", ",", "world", "!"]),
            ("don't", &["don", "'", "t"]),
            ("  leading and trailing  ", &["leading", "and", "trailing"]),
            ("e.g.", &["e", ".", "g", "."]),
            ("(x)", &["(", "x", ")"]),
            ("...", &[".", ".", "."]),
            ("Mixed\tCASE\nLines 42", &["mixed", "case", "lines", "42"]),
        ];
        for (text, expected) in table {
            assert_eq!(tokenize(text).tokens(), expected, "input {text:?}");
        }
    }

    #[test]
    fn rouge_n_examples() {
        let p = rouge_n(&ts(&["the", "cat", "sat"]), &ts(&["the", "cat", "sat"]), 1);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));

        let p = rouge_n(&ts(&["the", "cat"]), &ts(&["the", "cat", "sat"]), 1);
        assert_eq!(p.precision, 1.0);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.f1 - 0.8).abs() < 1e-15);

        let p = rouge_n(&ts(&["a", "b", "c"]), &ts(&["a", "b", "d", "c"]), 2);
        assert!((p.precision - 0.5).abs() < 1e-15);
        assert!((p.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.f1 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rouge_n_clips_repeats() {
        let p = rouge_n(&ts(&["a", "a", "a"]), &ts(&["a", "b"]), 1);
        assert!((p.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.recall, 0.5);
    }

    #[test]
    fn rouge_l_examples() {
        let x = ts(&["a", "b", "c"]);
        assert_eq!(rouge_l(&x, &x, false).f1, 1.0);
        assert_eq!(rouge_l(&x, &x, true).f1, 1.0);

        let p = rouge_l(&ts(&["a", "b", "c", "d"]), &ts(&["a", "c", "b", "d"]), false);
        assert_eq!((p.precision, p.recall, p.f1), (0.75, 0.75, 0.75));

        let p = rouge_l(&ts(&["x", "y"]), &ts(&["a", "b"]), false);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn summary_level_rouge_l_uses_union() {
        // ref sentence "a b c d ." against cand sentences "a b ." and "c d ."
        // union of LCS positions covers a b c d . -> 5 hits (one "." clipped)
        let cand = tokenize("a b. c d.");
        let reference = tokenize("a b c d.");
        let split = rouge_l(&cand, &reference, true);
        assert_eq!(split.recall, 1.0);
        assert!((split.precision - 5.0 / 6.0).abs() < 1e-15);
        let whole = rouge_l(&cand, &reference, false);
        assert_eq!(whole.recall, 1.0);
    }

    #[test]
    fn empty_inputs_score_zero() {
        let empty = TokenSeq::default();
        let x = ts(&["a"]);
        assert_eq!(rouge_n(&empty, &x, 1), Prf::default());
        assert_eq!(rouge_l(&x, &empty, true), Prf::default());
        assert_eq!(oracle_score(&empty, &empty), 0.0);
    }

    #[test]
    fn oracle_score_examples() {
        let x = ts(&["the", "cat", "sat"]);
        assert_eq!(oracle_score(&x, &x), 1.0);
        assert_eq!(oracle_score(&ts(&["dog"]), &x), 0.0);
        // R1 F1 = 0.8; bigrams: cand {the cat}, ref {the cat, cat sat} -> P=1, R=1/2, F1=2/3;
        // LCS = 2 -> P=1, R=2/3, F1=0.8
        let s = oracle_score(&ts(&["the", "cat"]), &x);
        let expected = (0.8 + 2.0 / 3.0 + 0.8) / 3.0;
        assert!((s - expected).abs() < 1e-15);
    }

    #[test]
    fn report_line_format() {
        let x = ts(&["a", "b"]);
        let line = RougeReport::compute(&x, &x, true).to_string();
        assert_eq!(line.split('\t').count(), 9);
        assert!(line.starts_with("1.0000\t1.0000\t1.0000"));
    }
}
