use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dyle");

fn dyle(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("spawn dyle")
}

fn files(dir: &Path) -> BTreeSet<String> {
    walk(dir, dir)
}

fn walk(root: &Path, dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(root, &p));
        } else {
            out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
        }
    }
    out
}

const TINY: [&str; 8] = [
    "--set",
    "embed_dim=6",
    "--set",
    "hidden_dim=8",
    "--set",
    "head_dim=4",
    "--set",
    "max_len=8",
];

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyle(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    for sub in ["rouge", "oracle", "synth", "extract", "generate", "train", "evaluate", "ablate", "visualize"] {
        let out = dyle(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
    }
    assert_eq!(dyle(dir.path(), &["summon"]).status.code(), Some(2));
    assert_eq!(dyle(dir.path(), &["rouge", "--candidate", "a"]).status.code(), Some(2));
    assert_eq!(dyle(dir.path(), &["synth", "--docs", "x"]).status.code(), Some(2));
}

#[test]
fn rouge_self_comparison() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "The cat sat. On the mat!").unwrap();
    let out = dyle(dir.path(), &["rouge", "--candidate", "a.txt", "--reference", "a.txt", "--sentence-split"]);
    assert_eq!(out.status.code(), Some(0));
    let line = String::from_utf8(out.stdout).unwrap();
    let cols: Vec<&str> = line.trim_end().split('\t').collect();
    assert_eq!(cols.len(), 9);
    assert!(cols.iter().all(|c| *c == "1.0000"), "{line}");
}

#[test]
fn missing_config_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyle(
        dir.path(),
        &["train", "--config", "missing.cfg", "--corpus", "c.jsonl", "--out", "m", "--log", "l"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn bad_corpus_line_is_an_operational_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.jsonl"), "{\"id\":\"x\",\"snippets\":[\"a\"],\"summary\":\"a\"}\nnot json\n").unwrap();
    let out = dyle(dir.path(), &["oracle", "--corpus", "c.jsonl", "--budget", "2", "--out", "o.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

fn pipeline(dir: &Path) {
    let ok = |args: &[&str]| {
        let out = dyle(dir, args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["synth", "--seed", "5", "--docs", "6", "--snippets", "5", "--salient", "2", "--out", "c.jsonl"]);
    std::fs::write(dir.join("run.cfg"), "# tiny run\nk=2\nepochs=2\ngrad_accum=3\n").unwrap();
    let mut train = vec!["train", "--config", "run.cfg", "--corpus", "c.jsonl", "--out", "m.ckpt", "--log", "loss.csv"];
    train.extend(TINY);
    train.extend(["--seed", "9", "--oracle-cache", "oracles.json"]);
    ok(&train);
    ok(&["oracle", "--corpus", "c.jsonl", "--budget", "3", "--out", "oracle.jsonl"]);
    ok(&["extract", "--checkpoint", "m.ckpt", "--corpus", "c.jsonl", "--k", "2", "--mode", "hybrid", "--out", "x.jsonl"]);
    ok(&["generate", "--checkpoint", "m.ckpt", "--corpus", "c.jsonl", "--weights", "static", "--out", "gen"]);
    ok(&["evaluate", "--checkpoint", "m.ckpt", "--corpus", "c.jsonl", "--out", "eval.csv"]);
    ok(&["visualize", "--checkpoint", "m.ckpt", "--corpus", "c.jsonl", "--doc", "synth-5-1", "--random-summary", "--out", "heat"]);
    let mut ablate = vec!["ablate", "--corpus", "c.jsonl", "--variants", "full,k=1", "--epochs", "1", "--out", "ablate.csv"];
    ablate.extend(TINY);
    ok(&ablate);
}

#[test]
fn full_pipeline_is_reproducible_and_writes_only_flagged_paths() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());

    let mut expected: BTreeSet<String> = [
        "c.jsonl",
        "run.cfg",
        "m.ckpt",
        "loss.csv",
        "oracles.json",
        "oracle.jsonl",
        "x.jsonl",
        "eval.csv",
        "heat.csv",
        "heat.svg",
        "heat-random.csv",
        "heat-random.svg",
        "ablate.csv",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..6 {
        expected.insert(format!("gen/synth-5-{i}.txt"));
        expected.insert(format!("gen/synth-5-{i}.weights.csv"));
    }
    assert_eq!(files(a.path()), expected);
    for f in &expected {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }

    let log = std::fs::read_to_string(a.path().join("loss.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("step,gen,oracle,consistency,total"));
    assert_eq!(log.lines().count(), 1 + 2 * 2);
    let first = std::fs::read_to_string(a.path().join("oracle.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(v["oracle_indices"].is_array() && v["scores"].is_array() && v["id"] == "synth-5-0");
    let weights = std::fs::read_to_string(a.path().join("gen/synth-5-0.weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 1 + 2, "one row per snippet");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        dyle(p, &["synth", "--docs", "4", "--snippets", "4", "--salient", "1", "--out", "c.jsonl"]).status.code(),
        Some(0)
    );
    std::fs::write(p.join("run.cfg"), "epochs=3\ngrad_accum=2\n").unwrap();
    let mut args = vec!["train", "--config", "run.cfg", "--corpus", "c.jsonl", "--out", "m", "--log", "l.csv", "--epochs", "1"];
    args.extend(TINY);
    assert_eq!(dyle(p, &args).status.code(), Some(0));
    let log = std::fs::read_to_string(p.join("l.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2);
}
