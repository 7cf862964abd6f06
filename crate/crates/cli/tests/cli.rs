use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn expect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expect"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn expect")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn synth(dir: &Path, name: &str, n: usize, seed: u64) {
    let n = n.to_string();
    let seed = seed.to_string();
    let parses = format!("{name}.parses.jsonl");
    let out = expect(dir, &["synthesize", "--n", &n, "--seed", &seed, "--out", &format!("{name}.jsonl"), "--parses", &parses]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stats_and_validate_on_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "c", 50, 1);

    let out = expect(dir.path(), &["stats", "c.jsonl", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["ok"], true);
    assert_eq!(v["stats"]["n_sentences"], 50);

    let out = expect(dir.path(), &["validate", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok: 50 instances"));
}

#[test]
fn validate_exits_two_on_bad_records() {
    let dir = tempfile::tempdir().unwrap();
    // evidence index past the end of the sentence
    let bad = r#"{"id":"a","source":["He","go","home"],"target":["He","goes","home"],"edit":{"src":[1,2],"tgt":[1,2]},"evidence":[7],"type":"subject-verb-agreement"}"#;
    fs::write(dir.path().join("bad.jsonl"), format!("{bad}\n")).unwrap();
    let out = expect(dir.path(), &["validate", "bad.jsonl", "--json"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["ok"], false);
    assert!(!v["issues"].as_array().unwrap().is_empty());

    fs::write(dir.path().join("broken.jsonl"), "{\"id\":\n").unwrap();
    let out = expect(dir.path(), &["validate", "broken.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_an_error_with_json_body() {
    let dir = tempfile::tempdir().unwrap();
    let out = expect(dir.path(), &["--json", "stats", "nope.jsonl"]);
    assert!(!out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["ok"], false);
    assert!(!v["error"].as_str().unwrap().is_empty());
}

#[test]
fn align_emits_span_edits() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("pairs.jsonl"),
        concat!(
            r#"{"id":"sub","source":"He go home","target":["He","goes","home"]}"#,
            "\n",
            r#"{"id":"ins","source":"I want go","target":"I want to go"}"#,
            "\n",
            r#"{"id":"del","source":"the the cat","target":"the cat"}"#,
            "\n",
        ),
    )
    .unwrap();
    let out = expect(dir.path(), &["align", "pairs.jsonl"]);
    assert!(out.status.success());
    let lines: Vec<Value> =
        String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["edit"], serde_json::json!({"src": [1, 2], "tgt": [1, 2]}));
    assert_eq!(lines[1]["edit"], serde_json::json!({"src": [2, 2], "tgt": [2, 3]}));
    assert_eq!(lines[2]["edit"]["tgt"][0], lines[2]["edit"]["tgt"][1]);
}

#[test]
fn parse_features_reports_coverage() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "c", 30, 2);
    let out = expect(dir.path(), &["parse-features", "c.jsonl", "--parses", "c.parses.jsonl", "--out", "f.jsonl", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert_eq!(v["coverage"]["instances"], 30);
    let feats = fs::read_to_string(dir.path().join("f.jsonl")).unwrap();
    assert_eq!(feats.lines().count(), 30);
    let first: Value = serde_json::from_str(feats.lines().next().unwrap()).unwrap();
    assert!(first["x"].as_array().unwrap().iter().any(|c| c == "correction"));
}

#[test]
fn synthesize_is_reproducible_and_rejects_bad_mix() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = expect(dir.path(), &["synthesize", "--n", "20", "--seed", "9", "--mix", "sva:1,number:1", "--out", &format!("{name}.jsonl")]);
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());

    let out = expect(dir.path(), &["--json", "synthesize", "--n", "5", "--mix", "bogus:1", "--out", "x.jsonl"]);
    assert!(!out.status.success());
    assert_eq!(stdout_json(&out)["ok"], false);
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "train", 60, 5);
    synth(dir.path(), "dev", 20, 6);
    fs::write(
        dir.path().join("run.toml"),
        "[encoder]\nhidden = 16\nlayers = 1\nvocab = { kind = \"hashed\", buckets = 256 }\n[train]\nepochs = 1\nlr = 0.003\nbatch_size = 8\n",
    )
    .unwrap();

    let out = expect(
        dir.path(),
        &["train", "--config", "run.toml", "--data", "train.jsonl", "--dev", "dev.jsonl", "--out-dir", "run", "--json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = stdout_json(&out);
    assert_eq!(report["report"]["epochs"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("run/best.json").exists());

    let out = expect(dir.path(), &["predict", "--ckpt", "run/best.json", "--data", "dev.jsonl", "--out", "pred.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("pred.jsonl")).unwrap().lines().count(), 20);

    let out = expect(dir.path(), &["evaluate", "--gold", "dev.jsonl", "--pred", "pred.jsonl", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    // the CLI score must equal the best dev score seen during training
    let best = report["report"]["best_dev_f05"].as_f64().unwrap();
    assert!((v["report"]["f05"].as_f64().unwrap() - best).abs() < 1e-12);
    let bucketed: u64 = v["length_buckets"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(bucketed, 20);

    let out = expect(dir.path(), &["evaluate", "--gold", "dev.jsonl", "--pred", "pred.jsonl", "--per-type"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("support"));
}

#[test]
fn evaluate_rejects_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "g", 5, 1);
    fs::write(dir.path().join("p.jsonl"), r#"{"id":"other","evidence":[],"type":"others"}"#.to_string() + "\n").unwrap();
    let out = expect(dir.path(), &["--json", "evaluate", "--gold", "g.jsonl", "--pred", "p.jsonl"]);
    assert!(!out.status.success());
    assert_eq!(stdout_json(&out)["ok"], false);
}
