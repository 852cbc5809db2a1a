use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn zsre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsre")).args(args).env_remove("ZSRE_LOG").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = zsre(args);
    assert!(out.status.success(), "{args:?}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Small synthetic corpus; returns (instances, relations, token embeddings).
fn synth(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let data = dir.join("data");
    ok(&["synth", "--out", s(&data), "--relations", "6", "--per-relation", "10", "--vocab-size", "120"]);
    (data.join("instances.jsonl"), data.join("relations.jsonl"), data.join("token_embeddings.jsonl"))
}

fn without_seconds(mut report: Value) -> Value {
    for rep in report["repeats"].as_array_mut().unwrap() {
        for e in rep["history"]["epochs"].as_array_mut().unwrap() {
            e["seconds"] = Value::Null;
        }
    }
    report
}

#[test]
fn synth_writes_corpus_files() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rel, emb) = synth(dir.path());
    assert_eq!(fs::read_to_string(&inst).unwrap().lines().count(), 60);
    assert_eq!(fs::read_to_string(&rel).unwrap().lines().count(), 6);
    assert!(fs::read_to_string(&emb).unwrap().lines().count() >= 120);
    assert_eq!(read_json(dir.path().join("data/resolved_config.json"))["n_relations"], 6);
}

#[test]
fn eval_writes_report_and_reruns_from_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rel, emb) = synth(dir.path());
    let first = dir.path().join("run1");
    let out = ok(&[
        "eval", "--instances", s(&inst), "--relations", s(&rel), "--embeddings", s(&emb),
        "--preset", "desk", "--epochs", "3", "--m", "2", "--repeats", "5", "--out", s(&first),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("macro"));
    let report = read_json(first.join("report.json"));
    assert_eq!(report["repeats"].as_array().unwrap().len(), 5);
    assert_eq!(report["split_seeds"], serde_json::json!([0, 1, 2, 3, 4]));
    let f1 = report["macro_f1"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let second = dir.path().join("run2");
    ok(&["eval", "--config", s(&first.join("resolved_config.json")), "--out", s(&second)]);
    assert_eq!(without_seconds(report), without_seconds(read_json(second.join("report.json"))));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rel, emb) = synth(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "instances": inst, "relations": rel, "embeddings": emb,
            "preset": "desk", "gamma": 2.0, "epochs": 1, "m": 2
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["train", "--config", s(&cfg), "--gamma", "3.25", "--out", s(&out)]);
    let resolved = read_json(out.join("resolved_config.json"));
    assert_eq!(resolved["gamma"], 3.25);
    assert_eq!(resolved["epochs"], 1);
    assert_eq!(read_json(out.join("checkpoint.json"))["train_config"]["gamma"], 3.25);
    assert_eq!(fs::read_to_string(out.join("train_log.jsonl")).unwrap().lines().count(), 1);

    let pred = dir.path().join("pred");
    ok(&[
        "predict", "--config", s(&cfg), "--checkpoint", s(&out.join("checkpoint.json")),
        "--input", s(&inst), "--dist", "cosine", "--out", s(&pred),
    ]);
    let lines = fs::read_to_string(pred.join("predictions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 60);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    // every relation in the relations file is a candidate
    let ranking = first["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 6);
    assert!(ranking.windows(2).all(|w| w[0]["distance"].as_f64() <= w[1]["distance"].as_f64()));
    assert_eq!(first["predicted"], ranking[0]["relation"]);
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rel, emb) = synth(dir.path());
    let out = zsre(&[
        "train", "--instances", s(&inst), "--relations", s(&rel), "--embeddings", s(&emb),
        "--alpha", "1.5", "--out", s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "{err}");
}

#[test]
fn gradcheck_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, rel, emb) = synth(dir.path());
    let base = [
        "gradcheck", "--instances", s(&inst), "--relations", s(&rel), "--embeddings", s(&emb),
        "--mixing", "true", "--encoder-trainable", "true", "--m", "2",
    ];
    let good = dir.path().join("good");
    let mut args = base.to_vec();
    args.extend(["--out", s(&good)]);
    let out = ok(&args);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max_rel_err"));
    assert_eq!(read_json(good.join("gradcheck.json"))["tensors"].as_array().unwrap().len(), 11);

    // a tolerance no finite-difference estimate can meet
    let bad = dir.path().join("bad");
    let mut args = base.to_vec();
    args.extend(["--gradcheck-tol", "1e-300", "--gradcheck-step", "1e-2", "--out", s(&bad)]);
    let out = zsre(&args);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_one_line() {
    let out = zsre(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("frobnicate"));
}

#[test]
fn missing_input_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = zsre(&[
        "split", "--instances", "/nonexistent/i.jsonl", "--relations", "/nonexistent/r.jsonl",
        "--out", s(dir.path()),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("/nonexistent/"), "{err}");
}
