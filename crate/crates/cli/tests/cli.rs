use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const SMALL: &str = "[train]\nepochs = 2\nhidden = 8\nbaseline_iterations = 200\n\n[eval]\nn_resamples = 50\n";

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuasion")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(out.status.success(), "persuasion {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Temp dir with a small corpus, a grudger dataset and a tiny config.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("small.toml"), SMALL).unwrap();
    ok(d, &["corpus", "synth", "--n", "120", "--seed", "1", "--out", "corpus.tsv"]);
    ok(d, &["generate", "--agent", "grudger", "--players", "6", "--corpus", "corpus.tsv", "--seed", "2", "--out", "data.jsonl"]);
    dir
}

#[test]
fn corpus_commands_and_manifest() {
    let dir = workspace();
    let d = dir.path();
    let summary: Value = serde_json::from_str(&ok(d, &["corpus", "validate", "corpus.tsv"])).unwrap();
    assert_eq!(summary["hotels"], 120);
    let m = json(&d.join("corpus.tsv.manifest.json"));
    assert_eq!(m["command"], "corpus synth");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["outputs"][0]["bytes"], fs::metadata(d.join("corpus.tsv")).unwrap().len());
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn generate_resume_matches_single_run() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["generate", "--agent", "grudger", "--players", "3", "--corpus", "corpus.tsv", "--seed", "2", "--out", "part.jsonl"]);
    ok(d, &["generate", "--agent", "grudger", "--players", "6", "--corpus", "corpus.tsv", "--seed", "2", "--out", "part.jsonl", "--resume"]);
    assert_eq!(fs::read(d.join("part.jsonl")).unwrap(), fs::read(d.join("data.jsonl")).unwrap());
    let m = json(&d.join("part.jsonl.manifest.json"));
    assert_eq!(m["details"]["players_written"], 3);
}

#[test]
fn dataset_stats_split_and_mix() {
    let dir = workspace();
    let d = dir.path();
    let stats: Value = serde_json::from_str(&ok(d, &["dataset", "stats", "data.jsonl"])).unwrap();
    assert_eq!(stats["stats"]["players"], 6);
    ok(d, &["dataset", "split", "data.jsonl", "--test-players", "2", "--splits", "2", "--seed", "3", "--out", "splits"]);
    for i in 0..2 {
        let test: Value =
            serde_json::from_str(&ok(d, &["dataset", "stats", &format!("splits/split{i}_test.jsonl")])).unwrap();
        let train: Value =
            serde_json::from_str(&ok(d, &["dataset", "stats", &format!("splits/split{i}_train.jsonl")])).unwrap();
        assert_eq!(test["stats"]["players"], 2);
        assert_eq!(train["stats"]["players"], 4);
    }
    ok(d, &["generate", "--agent", "always_go", "--players", "2", "--corpus", "corpus.tsv", "--out", "go.jsonl"]);
    let go = fs::read_to_string(d.join("go.jsonl")).unwrap().replace("scripted:", "go:");
    fs::write(d.join("go.jsonl"), go).unwrap();
    // same dm ids in both datasets cannot be mixed
    assert!(!bin(d, &["dataset", "mix", "data.jsonl", "data.jsonl", "--out", "bad.jsonl"]).status.success());
    ok(d, &["dataset", "mix", "data.jsonl", "go.jsonl", "--out", "mixed.jsonl"]);
    let mixed: Value = serde_json::from_str(&ok(d, &["dataset", "stats", "mixed.jsonl"])).unwrap();
    assert_eq!(mixed["stats"]["players"], 8);
}

#[test]
fn train_predict_eval() {
    let dir = workspace();
    let d = dir.path();
    let c = ["--config", "small.toml"];
    for model in ["lstm", "baseline"] {
        let file = format!("{model}.bin");
        ok(d, &[&c[..], &["train", "--data", "data.jsonl", "--corpus", "corpus.tsv", "--model", model, "--out", &file]].concat());
        let m = json(&d.join(format!("{file}.manifest.json")));
        assert_eq!(m["config"]["train"]["epochs"], 2);
        ok(d, &["predict", "--model", &file, "--data", "data.jsonl", "--corpus", "corpus.tsv", "--out", "pred.jsonl"]);
        let preds = lines(&d.join("pred.jsonl"));
        let stats: Value = serde_json::from_str(&ok(d, &["dataset", "stats", "data.jsonl"])).unwrap();
        assert_eq!(preds.len() as u64, stats["stats"]["decisions"].as_u64().unwrap());
        for p in &preds {
            let prob = p["go_probability"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&prob));
            assert_eq!(p["predicted_action"], prob >= 0.5);
            assert!(p["dm_action"].is_boolean());
        }
        ok(d, &[&c[..], &["eval", "--model", &file, "--data", "data.jsonl", "--corpus", "corpus.tsv", "--out", "r.jsonl"]].concat());
        let plain = lines(&d.join("r.jsonl"));
        assert!(plain.iter().all(|l| l["metric"] != "expert_accuracy"));
        ok(
            d,
            &[&c[..], &["eval", "--model", &file, "--data", "data.jsonl", "--corpus", "corpus.tsv", "--per-expert", "--winning-rates", "--out", "r.jsonl"]]
                .concat(),
        );
        let full = lines(&d.join("r.jsonl"));
        assert_eq!(full.iter().filter(|l| l["metric"] == "expert_accuracy").count(), 6);
        assert_eq!(full.iter().filter(|l| l["metric"] == "winning_rate").count(), 6);
    }
}

#[test]
fn experiments_write_rows_and_resources() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["generate", "--agent", "grudger", "--players", "2", "--corpus", "corpus.tsv", "--seed", "9", "--out", "test.jsonl"]);
    // distinct player ids for the test set
    let test = fs::read_to_string(d.join("test.jsonl")).unwrap().replace("scripted:", "held:");
    fs::write(d.join("test.jsonl"), test).unwrap();
    let out = bin(
        d,
        &["--config", "small.toml", "experiment", "sweep", "--sizes", "2,4,2", "--source", "g=data.jsonl", "--test", "test.jsonl",
          "--corpus", "corpus.tsv", "--model", "baseline", "--out", "sweep.jsonl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&d.join("sweep.jsonl"));
    assert_eq!(rows.iter().map(|r| r["train_players"].as_u64().unwrap()).collect::<Vec<_>>(), [2, 4]);
    let m = json(&d.join("sweep.jsonl.manifest.json"));
    assert_eq!(m["details"]["resources"].as_array().unwrap().len(), 2);
    assert!(m["details"]["resources"][0]["train_decisions"].as_u64().unwrap() > 0);

    let too_many = bin(
        d,
        &["--config", "small.toml", "experiment", "sweep", "--sizes", "50", "--source", "g=data.jsonl", "--test", "test.jsonl",
          "--corpus", "corpus.tsv", "--model", "baseline"],
    );
    assert!(!too_many.status.success());

    ok(
        d,
        &["--config", "small.toml", "experiment", "global-vs-local", "--train", "data.jsonl", "--test", "test.jsonl",
          "--corpus", "corpus.tsv", "--expert", "honest", "--model", "baseline", "--out", "gl.jsonl"],
    );
    let gl = lines(&d.join("gl.jsonl"));
    assert_eq!(gl.len(), 1);
    assert_eq!(gl[0]["expert"], "honest");
}

#[test]
fn oracle_cache_drives_generation() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["oracle", "build", "--corpus", "corpus.tsv", "--backend", "stub", "--out", "oracle.jsonl"]);
    ok(d, &["generate", "--agent", "threshold", "--players", "2", "--corpus", "corpus.tsv", "--oracle-cache", "oracle.jsonl", "--out", "t.jsonl"]);
    let m = json(&d.join("t.jsonl.manifest.json"));
    let inputs: Vec<&str> = m["inputs"].as_array().unwrap().iter().map(|i| i["path"].as_str().unwrap()).collect();
    assert!(inputs.contains(&"oracle.jsonl"), "{inputs:?}");
}

#[test]
fn errors_are_reported() {
    let dir = workspace();
    let d = dir.path();
    let cases: [&[&str]; 5] = [
        &["generate", "--agent", "llm", "--players", "1", "--corpus", "corpus.tsv", "--out", "x.jsonl"],
        &["generate", "--agent", "nobody", "--players", "1", "--corpus", "corpus.tsv", "--out", "x.jsonl"],
        &["train", "--data", "missing.jsonl", "--corpus", "corpus.tsv", "--out", "m.bin"],
        &["eval", "--data", "data.jsonl"],
        &["corpus", "validate", "data.jsonl"],
    ];
    for args in cases {
        let out = bin(d, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
    fs::write(d.join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let out = bin(d, &["--config", "bad.toml", "corpus", "validate", "corpus.tsv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, Value) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nhost: x\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp[9..12].parse().unwrap();
    let body = resp.split_once("\r\n\r\n").unwrap().1;
    (status, serde_json::from_str(body).unwrap_or(Value::Null))
}

#[test]
fn serve_accepts_sessions() {
    let dir = workspace();
    let d = dir.path();
    let mut child = Command::new(env!("CARGO_BIN_EXE_persuasion"))
        .current_dir(d)
        .args(["serve", "--corpus", "corpus.tsv", "--port", "0", "--seed", "4", "--out-dataset", "human.jsonl", "--log-dir", "logs"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("serving on http://").expect(&line).to_string();

    let (status, created) = http(&addr, "POST", "/sessions", r#"{"player_alias": "p1"}"#);
    assert_eq!(status, 201);
    let id = created["session_id"].as_str().unwrap().to_string();
    let (status, round) = http(&addr, "GET", &format!("/sessions/{id}/round"), "");
    assert_eq!(status, 200);
    assert_eq!(round["round_index"], 1);
    let (status, _) = http(&addr, "POST", &format!("/sessions/{id}/action"), r#"{"action": "go"}"#);
    assert_eq!(status, 200);
    let (status, err) = http(&addr, "GET", "/sessions/nope/summary", "");
    assert_eq!(status, 404);
    assert_eq!(err["error"]["code"], "unknown_session");
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(d.join("human.jsonl.manifest.json").exists());
    let log = fs::read_to_string(d.join("logs").join(format!("{id}.log"))).unwrap();
    assert_eq!(log.lines().nth(1), Some("go"));
}
