mod common;

use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_island-query"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).args(common::fixture_args()).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn parse_reports_analyses() {
    let out = run(&["parse", "numéro de dupont à lausanne"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["category"], "request");
    let a = &v["analyses"][0];
    assert_eq!(a["covered"], serde_json::json!([0, 1, 2, 3, 4]));
    assert!(v.get("chart").is_none());
}

#[test]
fn parse_with_full_threshold_on_noise_exits_2() {
    let out = run(&["parse", "euh numéro de dupont à lausanne", "--threshold", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["analyses"], serde_json::json!([]));
}

#[test]
fn parse_chart_dump_has_stable_fields() {
    let out = run(&["parse", "numéro de dupont", "--show-chart"]);
    let v = json(&out);
    let e = &v["chart"]["edges"][0];
    for field in ["id", "cat", "start", "end", "covered", "weight", "rule", "children"] {
        assert!(e.get(field).is_some(), "{field}");
    }
}

#[test]
fn bad_grammar_path_exits_1() {
    let out = bin().args(["parse", "x", "--grammar", "/nonexistent"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_grammar_exits_1_with_diagnostic() {
    let dir = std::env::temp_dir().join(format!("island-query-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.grammar");
    std::fs::write(&path, "start s\nrule s -> t\n").unwrap();
    let out = bin()
        .args(["parse", "x", "--grammar", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined category t"));
}

#[test]
fn chunk_prints_segments_and_hypotheses() {
    let out = run(&["chunk", "je voudrais le numéro de dupont", "--show-lattice"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["segments"][0]["kind"], "query_body");
    let hyps = v["hypotheses"].as_array().unwrap();
    assert!(hyps.iter().any(|h| h["chunks"].as_array().unwrap().iter().any(|c| c["text"] == "dupont")));
    assert!(v["lattice"]["arcs"].as_array().unwrap().len() >= 6);
}

#[test]
fn query_returns_records() {
    let out = run(&["query", "j'aimerais le numéro de dupont à lausanne"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["best"]["query"], "name=\"dupont\" AND city=\"lausanne\"");
    assert_eq!(v["best"]["records"].as_array().unwrap().len(), 2);
}

#[test]
fn query_reads_stdin() {
    let mut child = bin()
        .args(["query", "-"])
        .args(common::fixture_args())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("adresse de favre à sion\n".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["best"]["query"], "name=\"favre\" AND city=\"sion\"");
}

#[test]
fn query_without_consistent_frame_exits_2() {
    let dir = std::env::temp_dir().join(format!("island-query-kb-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let kb = dir.join("clash.kb");
    std::fs::write(
        &kb,
        "theory t\n  default query = numéro\n  default city = lausanne\n  constraint incompatible query=numéro city=lausanne\n",
    )
    .unwrap();
    let mut args = common::fixture_args();
    let at = args.iter().position(|a| a == "--kb").unwrap();
    args[at + 1] = kb.display().to_string();
    let out = bin().args(["query", "blorp"]).args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["best"], Value::Null);
    assert_eq!(v["frames"][0]["violations"][0], "t:1");
}

#[test]
fn gibberish_query_succeeds_with_defaults() {
    let out = run(&["query", "blorp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["frames"][0]["slots"][0]["origin"], "defaulted");
}

#[test]
fn missing_kb_exits_1() {
    let g = common::fixture("phonebook.grammar");
    let s = common::fixture("phonebook.schema.json");
    let out = bin()
        .args(["query", "x", "--grammar", g.to_str().unwrap(), "--schema", s.to_str().unwrap()])
        .args(["--kb", "/nonexistent.kb"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_context_exits_1() {
    let out = run(&["query", "x", "--context", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_of_range_threshold_exits_1() {
    let out = run(&["parse", "x", "--threshold", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_reports_micro_f1() {
    let gold = common::fixture("gold.jsonl");
    let out = run(&["eval", gold.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let f1 = json(&out)["micro"]["f1"].as_f64().unwrap();
    assert!(f1 >= 0.8);
}

#[test]
fn eval_on_empty_corpus_uses_the_zero_rule() {
    let dir = std::env::temp_dir().join(format!("island-query-eval-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let out = run(&["eval", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["micro"]["tp"], 0);
    assert_eq!(v["micro"]["precision"], 1.0);
    assert_eq!(v["micro"]["recall"], 1.0);
}

#[test]
fn malformed_gold_exits_1() {
    let dir = std::env::temp_dir().join(format!("island-query-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.jsonl");
    std::fs::write(&path, "{\"utterance\": 3}\n").unwrap();
    let out = run(&["eval", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
