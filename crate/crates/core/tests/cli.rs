use std::path::Path;
use std::process::{Command, Output};

use bss::data_io::{load_deployment, load_instance_dir};

fn bss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bss")).args(args).output().expect("spawn bss")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn gen(dir: &Path) {
    let out = bss(&["gen", "--width", "80", "--height", "80", "--seed", "5", "--out", p(dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_requires_out() {
    let out = bss(&["gen", "--width", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn gen_solve_eval_render() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("inst");
    gen(&inst_dir);
    let inst = load_instance_dir(&inst_dir).unwrap();
    assert!(inst.weak_cells().count() > 0);

    let dep = tmp.path().join("dep.csv");
    let report = tmp.path().join("report.json");
    let out = bss(&["solve", "--instance", p(&inst_dir), "--algo", "greedy", "--out", p(&dep), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("feasible"));
    assert!(!load_deployment(&dep).unwrap().is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["feasible"], true);

    let out = bss(&["eval", "--instance", p(&inst_dir), "--deployment", p(&dep), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let evaluated: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(evaluated, json);

    // An empty deployment misses the coverage threshold.
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "x,y,kind\n").unwrap();
    let out = bss(&["eval", "--instance", p(&inst_dir), "--deployment", p(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("coverage_shortfall"));

    let svg = tmp.path().join("map.svg");
    let out = bss(&["render", "--instance", p(&inst_dir), "--deployment", p(&dep), "--out", p(&svg)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let ppm = tmp.path().join("map.ppm");
    let out = bss(&["render", "--instance", p(&inst_dir), "--out", p(&ppm), "--scale", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read(&ppm).unwrap().starts_with(b"P6\n160 160\n255\n"));
}

#[test]
fn solve_reports_infeasible_and_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("inst");
    gen(&inst_dir);
    let out = bss(&["solve", "--instance", p(&inst_dir), "--algo", "greedy", "--budget", "1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let out = bss(&["solve", "--instance", p(&inst_dir), "--algo", "pso", "--candidates", "explicit:"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("candidate"));
    let out = bss(&["solve", "--instance", p(&tmp.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = bss(&["solve", "--instance", p(&inst_dir), "--algo", "simplex"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("inst");
    gen(&inst_dir);
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"algorithm":"pso","seed":4,"max_evaluations":400}"#).unwrap();
    let out = bss(&["solve", "--instance", p(&inst_dir), "--config", p(&cfg), "--algo", "sa"]);
    assert!(stdout(&out).starts_with("sa: "), "{}", stdout(&out));
    assert!(stdout(&out).contains("400 evaluations"));
}

#[test]
fn agent_run_with_and_without_retrieval() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("inst");
    gen(&inst_dir);
    let kb = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/knowledge.txt");

    let out = bss(&["agent", "run", "--instance", p(&inst_dir), "--preset", "rag-gated", "--cap", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("failure after 2 iteration(s)"));

    let transcript = tmp.path().join("t.jsonl");
    let dep = tmp.path().join("dep.csv");
    let out = bss(&[
        "agent", "run", "--instance", p(&inst_dir), "--preset", "rag-gated", "--rag", p(&kb),
        "--transcript", p(&transcript), "--out", p(&dep),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&transcript)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|l| l["event"] == "test" && l["passed"] == true));
    assert!(load_deployment(&dep).is_ok());
}

#[test]
fn agent_run_claba_against_child_process_proposer() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("inst");
    gen(&inst_dir);
    let endpoint = format!("{} proposer --preset budget-doubling", env!("CARGO_BIN_EXE_bss"));
    let out = bss(&[
        "agent", "run", "--instance", p(&inst_dir), "--strategy", "claba", "--proposer", "external",
        "--endpoint", &endpoint, "--timeout-ms", "20000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("success after"));

    // No endpoint anywhere is a usage error.
    let out = Command::new(env!("CARGO_BIN_EXE_bss"))
        .args(["agent", "run", "--instance", p(&inst_dir), "--proposer", "external"])
        .env_remove("BSS_PROPOSER_ENDPOINT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn proposer_serves_stdio() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_bss"))
        .args(["proposer", "--preset", "greedy"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"garbage\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let reply: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(reply["error"].as_str().unwrap().contains("malformed request"));
}

#[test]
fn rag_index_and_query() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/knowledge.txt");
    let store = tmp.path().join("store.json");
    let out = bss(&["rag", "index", "--kb", p(&kb), "--out", p(&store), "--dim", "512"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("indexed 6 documents"));
    let out = bss(&["rag", "query", "--store", p(&store), "--k", "2", "greedy", "coverage", "per", "cost"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("1. [greedy-siting-recipe]"), "{text}");
}

#[test]
fn experiment_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let inst_dir = tmp.path().join("parent");
    let out = bss(&["gen", "--width", "300", "--height", "300", "--seed", "1", "--out", p(&inst_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let csv = tmp.path().join("report.csv");
    let out = bss(&[
        "experiment", "--instance", p(&inst_dir), "--regions", "3", "--size", "60", "--methods", "greedy,laba",
        "--budget", "3000", "--out", p(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("laba"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(bss::experiment::REPORT_HEADER));
    assert_eq!(lines.count(), 3 * 2 + 2);

    let out = bss(&["experiment", "--instance", p(&inst_dir), "--methods", "greedy,bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
