//! Command-line entry point. [`run`] returns the process exit code:
//! 0 on success, 1 on operational failure, 2 on usage errors.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::corpus::{load_corpus, synth_corpus, write_corpus, Document};
use crate::error::{Error, Result};
use crate::extractor::{hybrid_select, top_k};
use crate::generator::WeightMode;
use crate::metrics::{tokenize, RougeReport};
use crate::oracle::greedy_oracle;
use crate::trainer::{
    cached_oracles, compute_oracles, evaluate, evaluate_oracle_fed, export_heatmap, load_model, predict,
    random_summary_weights, run_ablation, train_with_oracles, write_ablation_csv, write_loss_log, TrainConfig, Variant,
};

#[derive(Parser, Debug)]
#[command(name = "dyle", version, about = "Extract-then-generate summarization with dynamic snippet weights")]
struct Cli {
    /// Seed for every stochastic step of the subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ROUGE-1/2/L of a candidate text against a reference text.
    Rouge {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Summary-level ROUGE-L over sentences.
        #[arg(long)]
        sentence_split: bool,
    },
    /// Greedy extractive oracle per document, as JSON lines.
    Oracle {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a synthetic keyword corpus.
    Synth {
        #[arg(long)]
        docs: usize,
        #[arg(long)]
        snippets: usize,
        #[arg(long)]
        salient: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extractor scores and the selected snippets, as JSON lines.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ExtractMode::Topk)]
        mode: ExtractMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summaries plus per-document weight matrices.
    Generate {
        #[command(flatten)]
        decode: DecodeArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains a model and writes a checkpoint and a loss log.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Loss log (CSV).
        #[arg(long)]
        log: PathBuf,
        /// Oracle cache file, reused when the corpus is unchanged.
        #[arg(long)]
        oracle_cache: Option<PathBuf>,
    },
    /// ROUGE of generated summaries and of the extracted snippets.
    Evaluate {
        #[command(flatten)]
        decode: DecodeArgs,
        /// Feed the generator oracle snippets topped up by the extractor.
        #[arg(long)]
        oracle_fed: bool,
        /// Per-document report (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains and evaluates several variants from one seed.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Training corpus.
        #[arg(long)]
        corpus: PathBuf,
        /// Evaluation corpus; defaults to the training corpus.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Comma-separated: full, no_hybrid, no_consistency, no_oracle, k=N.
        #[arg(long, value_delimiter = ',', default_value = "full,no_hybrid,no_consistency,no_oracle")]
        variants: Vec<String>,
        /// Comparison table (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Heatmap of one document's decoding weights.
    Visualize {
        #[command(flatten)]
        decode: DecodeArgs,
        /// Document index or id.
        #[arg(long, default_value = "0")]
        doc: String,
        /// Also teacher-force another document's gold summary.
        #[arg(long)]
        random_summary: bool,
        /// Output path stem; `.csv` and `.svg` are appended.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExtractMode {
    Topk,
    Hybrid,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum WeightsArg {
    Dynamic,
    Static,
}

impl From<WeightsArg> for WeightMode {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Dynamic => WeightMode::Dynamic,
            WeightsArg::Static => WeightMode::Static,
        }
    }
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Snippets per document; defaults to the trained K.
    #[arg(long)]
    k: Option<usize>,
    /// Defaults to the trained max_len.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Dynamic)]
    weights: WeightsArg,
}

/// Precedence: flags > config file > defaults.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// `key=value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, e.g. `--set lambda_o=0`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    weights: Option<WeightsArg>,
}

impl ConfigArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            c.apply_text(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            c.set(key, value)?;
        }
        if let Some(k) = self.k {
            c.k = k;
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(lr) = self.lr {
            c.lr = lr;
        }
        if let Some(w) = self.weights {
            c.weight_mode = w.into();
        }
        if let Some(s) = seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn json_lines(values: impl IntoIterator<Item = serde_json::Value>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

/// Keeps ids usable as file names.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn pick_doc<'a>(docs: &'a [Document], key: &str) -> Result<(usize, &'a Document)> {
    if let Some(i) = docs.iter().position(|d| d.id == key) {
        return Ok((i, &docs[i]));
    }
    key.parse::<usize>()
        .ok()
        .and_then(|i| docs.get(i).map(|d| (i, d)))
        .ok_or_else(|| Error::Config(format!("no document {key:?}")))
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let mut stdout = std::io::stdout().lock();
    let out_err = |e: std::io::Error| Error::io("<stdout>", e);
    match cli.command {
        Command::Rouge {
            candidate,
            reference,
            sentence_split,
        } => {
            let c = tokenize(&read_text(&candidate)?);
            let r = tokenize(&read_text(&reference)?);
            writeln!(stdout, "{}", RougeReport::compute(&c, &r, sentence_split)).map_err(out_err)?;
        }
        Command::Oracle { corpus, budget, out } => {
            let docs = load_corpus(&corpus)?;
            let lines = compute_oracles(&docs, budget).into_iter().zip(&docs).map(|(o, d)| {
                json!({"id": d.id, "oracle_indices": o.indices, "scores": o.score_trajectory})
            });
            write_file(&out, &json_lines(lines))?;
        }
        Command::Synth {
            docs,
            snippets,
            salient,
            out,
        } => {
            let corpus = synth_corpus(seed.unwrap_or(0), docs, snippets, salient)?;
            write_corpus(&out, &corpus)?;
        }
        Command::Extract {
            checkpoint,
            corpus,
            k,
            mode,
            out,
        } => {
            let (model, config) = load_model(&checkpoint)?;
            let docs = load_corpus(&corpus)?;
            let mut lines = Vec::with_capacity(docs.len());
            for d in &docs {
                let scores = model.score(d.input())?;
                let selection = match mode {
                    ExtractMode::Topk => top_k(scores.values(), k),
                    ExtractMode::Hybrid => {
                        let budget = if config.oracle_budget == 0 { 2 * k } else { config.oracle_budget };
                        hybrid_select(&greedy_oracle(&d.snippets, &d.gold, budget), scores.values(), k)
                    }
                };
                lines.push(json!({"id": d.id, "indices": selection.indices, "scores": scores.values()}));
            }
            write_file(&out, &json_lines(lines))?;
        }
        Command::Generate { decode, out } => {
            let (model, config) = load_model(&decode.checkpoint)?;
            let docs = load_corpus(&decode.corpus)?;
            let k = decode.k.unwrap_or(config.k);
            let max_len = decode.max_len.unwrap_or(config.max_len);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for d in &docs {
                let p = predict(&model, d.input(), k, decode.weights.into(), max_len)?;
                let stem = file_stem(&d.id);
                write_file(&out.join(format!("{stem}.txt")), &format!("{}\n", p.text.to_text()))?;
                write_file(
                    &out.join(format!("{stem}.weights.csv")),
                    &crate::trainer::weights_csv(&p.summary.weight_matrix),
                )?;
            }
            writeln!(stdout, "wrote {} summaries to {}", docs.len(), out.display()).map_err(out_err)?;
        }
        Command::Train {
            config,
            corpus,
            out,
            log,
            oracle_cache,
        } => {
            let config = config.resolve(seed)?;
            let docs = load_corpus(&corpus)?;
            let budget = config.effective_oracle_budget();
            let oracles = match &oracle_cache {
                Some(path) => cached_oracles(&docs, budget, path)?,
                None => compute_oracles(&docs, budget),
            };
            let outcome = train_with_oracles(&config, &docs, &oracles)?;
            outcome.checkpoint(&config).save(&out)?;
            write_loss_log(&log, &outcome.log)?;
            if let Some(last) = outcome.log.last() {
                writeln!(
                    stdout,
                    "{} steps; last gen {:.4} oracle {:.4} consistency {:.4} total {:.4}",
                    last.step, last.gen, last.oracle, last.consistency, last.total
                )
                .map_err(out_err)?;
            }
        }
        Command::Evaluate { decode, oracle_fed, out } => {
            let (model, config) = load_model(&decode.checkpoint)?;
            let docs = load_corpus(&decode.corpus)?;
            let k = decode.k.unwrap_or(config.k);
            let max_len = decode.max_len.unwrap_or(config.max_len);
            let report = if oracle_fed {
                let oracles = compute_oracles(&docs, config.effective_oracle_budget());
                evaluate_oracle_fed(&model, &docs, &oracles, k, decode.weights.into(), max_len)?
            } else {
                evaluate(&model, &docs, k, decode.weights.into(), max_len)?
            };
            report.write_csv(&out)?;
            writeln!(stdout, "extracted\t{}", report.mean_extracted).map_err(out_err)?;
            writeln!(stdout, "generated\t{}", report.mean_generated).map_err(out_err)?;
        }
        Command::Ablate {
            config,
            corpus,
            test,
            variants,
            out,
        } => {
            let config = config.resolve(seed)?;
            let variants = variants.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>>>()?;
            let train_docs = load_corpus(&corpus)?;
            let test_docs = match &test {
                Some(p) => load_corpus(p)?,
                None => train_docs.clone(),
            };
            let rows = run_ablation(&config, &train_docs, &test_docs, &variants)?;
            write_ablation_csv(&out, &rows)?;
            for r in &rows {
                writeln!(stdout, "{}\t{:.4}", r.variant, r.report.mean_generated.avg_f1()).map_err(out_err)?;
            }
        }
        Command::Visualize {
            decode,
            doc,
            random_summary,
            out,
        } => {
            let (model, config) = load_model(&decode.checkpoint)?;
            let docs = load_corpus(&decode.corpus)?;
            let (index, d) = pick_doc(&docs, &doc)?;
            let k = decode.k.unwrap_or(config.k);
            let max_len = decode.max_len.unwrap_or(config.max_len);
            let p = predict(&model, d.input(), k, decode.weights.into(), max_len)?;
            let files = export_heatmap(&p.summary.weight_matrix, &out)?;
            writeln!(
                stdout,
                "{}\tentropy {:.4}\t{}",
                d.id,
                p.summary.weight_matrix.mean_column_entropy(),
                files.svg.display()
            )
            .map_err(out_err)?;
            if random_summary {
                let (other, wm) = random_summary_weights(&model, &docs, index, k, seed.unwrap_or(config.seed))?;
                let mut stem = out.as_os_str().to_owned();
                stem.push("-random");
                let files = export_heatmap(&wm, PathBuf::from(stem))?;
                writeln!(
                    stdout,
                    "{} (summary of {})\tentropy {:.4}\t{}",
                    d.id,
                    docs[other].id,
                    wm.mean_column_entropy(),
                    files.svg.display()
                )
                .map_err(out_err)?;
            }
        }
    }
    Ok(())
}
