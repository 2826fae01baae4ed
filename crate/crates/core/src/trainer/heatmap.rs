use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::extractor::top_k;
use crate::generator::{teacher_forced_forward, GenInput, WeightMatrix};
use crate::model::Model;

const CELL: usize = 28;
const LEFT: usize = 64;
const TOP: usize = 24;
const BOTTOM: usize = 56;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Raw weights, one row per snippet and one column per decoding step.
pub fn weights_csv(wm: &WeightMatrix) -> String {
    let mut s = String::from("snippet");
    for t in 1..=wm.cols() {
        let _ = write!(s, ",step_{t}");
    }
    s.push('\n');
    for (k, row) in wm.entries.iter().enumerate() {
        let _ = write!(s, "{k}");
        for w in row {
            let _ = write!(s, ",{w}");
        }
        s.push('\n');
    }
    s
}

/// Gray-scale heatmap; darker cells carry more weight. Snippets run down
/// the y axis, decoding steps along the x axis.
pub fn render_svg(wm: &WeightMatrix) -> String {
    let (rows, cols) = (wm.rows(), wm.cols());
    let width = LEFT + cols * CELL + 16;
    let height = TOP + rows * CELL + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (k, row) in wm.entries.iter().enumerate() {
        for (t, &w) in row.iter().enumerate() {
            let gray = (255.0 * (1.0 - w.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({gray},{gray},{gray})" stroke="rgb(153,153,153)" stroke-width="0.5"><title>snippet {k}, step {}: {w:.4}</title></rect>"#,
                LEFT + t * CELL,
                TOP + k * CELL,
                t + 1
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{k}</text>"#,
            LEFT - 6,
            TOP + k * CELL + CELL / 2
        );
    }
    for t in 0..cols {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + t * CELL + CELL / 2,
            TOP + rows * CELL + 14,
            t + 1
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">decoding step</text>"#,
        LEFT + cols * CELL / 2,
        TOP + rows * CELL + 40
    );
    let cy = TOP + rows * CELL / 2;
    let _ = writeln!(
        s,
        r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">snippet</text>"#
    );
    s.push_str("</svg>\n");
    s
}

/// Writes `<path>.csv` and `<path>.svg`.
pub fn export_heatmap(wm: &WeightMatrix, path: impl AsRef<Path>) -> Result<HeatmapFiles> {
    if wm.rows() == 0 || wm.cols() == 0 {
        return Err(Error::shape("export_heatmap", "empty weight matrix"));
    }
    let path = path.as_ref();
    let files = HeatmapFiles {
        csv: path.with_extension("csv"),
        svg: path.with_extension("svg"),
    };
    std::fs::write(&files.csv, weights_csv(wm)).map_err(|e| Error::io(&files.csv, e))?;
    std::fs::write(&files.svg, render_svg(wm)).map_err(|e| Error::io(&files.svg, e))?;
    Ok(files)
}

/// Dynamic weights obtained by teacher-forcing the gold summary of another
/// document, drawn uniformly with `seed`, through document `index`'s
/// test-time X_K. Returns the other document's position too.
pub fn random_summary_weights(
    model: &Model,
    docs: &[Document],
    index: usize,
    k: usize,
    seed: u64,
) -> Result<(usize, WeightMatrix)> {
    if docs.len() < 2 || index >= docs.len() {
        return Err(Error::Config("random-summary baseline needs another document".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut other = rng.random_range(0..docs.len() - 1);
    if other >= index {
        other += 1;
    }
    let doc = &docs[index];
    let scores = model.score(doc.input())?;
    let selection = top_k(scores.values(), k);
    let (query, snippets) = model.encode_snippets(doc.input(), &selection.indices);
    let input = GenInput {
        query: &query,
        snippets: snippets.iter().map(Vec::as_slice).collect(),
    };
    let target = model.vocab.encode_target(&docs[other].gold);
    let steps = teacher_forced_forward(&model.generator, &model.params, &input, &target)?;
    Ok((other, WeightMatrix::from_steps(&steps)))
}
