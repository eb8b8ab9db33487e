//! End-to-end tests of the binary: JSON report shape, exit-code contract,
//! and determinism.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn write_fixture(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a single JSON document")
}

const TWO_STATE: &str = r#"{"states":["a","b"],"rows":[["1/2","1/2"],["1/4","3/4"]]}"#;
const FAMILY_13: &str = r#"{"states":["1","2","3"],"rows":[["0","1/3","2/3"],["0","1","0"],["0","0","1"]]}"#;
const FAMILY_15: &str = r#"{"states":["1","2","3"],"rows":[["0","1/5","4/5"],["0","1","0"],["0","0","1"]]}"#;
const RANK_ONE_15: &str = r#"{"rows":[["1/5","4/5"],["1/5","4/5"]]}"#;
const RANK_ONE_25: &str = r#"{"rows":[["2/5","3/5"],["2/5","3/5"]]}"#;
const PERM2: &str = r#"{"rows":[["0","1"],["1","0"]]}"#;
const BLOCKS_23: &str = r#"{"rows":[
  ["1/2","1/2","0","0","0"],
  ["1/3","2/3","0","0","0"],
  ["0","0","0","1/2","1/2"],
  ["0","0","1","0","0"],
  ["0","0","1","0","0"]]}"#;
const BLOCKS_23_OTHER: &str = r#"{"rows":[
  ["1/7","6/7","0","0","0"],
  ["2/7","5/7","0","0","0"],
  ["0","0","0","1/4","3/4"],
  ["0","0","1/2","1/4","1/4"],
  ["0","0","1","0","0"]]}"#;
const BLOCKS_5: &str = r#"{"rows":[
  ["0","1","0","0","0"],
  ["0","0","1","0","0"],
  ["0","0","0","1","0"],
  ["0","0","0","0","1"],
  ["1/5","1/5","1/5","1/5","1/5"]]}"#;

#[test]
fn analyze_emits_classes_and_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", TWO_STATE);
    let out = run(&["analyze", p.to_str().unwrap(), "--stationary"]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    assert_eq!(report["command"], "analyze");
    assert_eq!(report["results"]["essential"], true);
    assert_eq!(report["results"]["stationary"]["a,b"]["a"], "1/3");
    assert_eq!(report["results"]["stationary"]["a,b"]["b"], "2/3");
    assert!(report["inputs"]["p"]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn analyze_regularity_lists_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", FAMILY_13);
    let out = run(&["analyze", p.to_str().unwrap(), "--regularity"]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    let cands: Vec<&str> = report["results"]["regularity"]["candidate_singular"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(cands, vec!["2", "3"]);
}

#[test]
fn analyze_bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "bad.json", r#"{"rows":[["1/2","1/3"],["0","1"]]}"#);
    let out = run(&["analyze", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validation"));
}

#[test]
fn compare_algebraic_and_isometric_on_rank_one_family() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", RANK_ONE_15);
    let q = write_fixture(&dir, "q.json", RANK_ONE_25);
    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "algebraic"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "YES");

    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "isometric"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "NO");
}

#[test]
fn compare_isometric_unknown_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", FAMILY_13);
    let q = write_fixture(&dir, "q.json", FAMILY_15);
    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "isometric"]);
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "UNKNOWN");
    assert_eq!(report["results"]["verdict"]["cutoff"], 12);
    assert!(!report["warnings"].as_array().unwrap().is_empty());

    // The ratio criterion itself passes up to the cutoff.
    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "eq31"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "YES");
    assert_eq!(report["results"]["verdict"]["mode"], "eq31_up_to_N");
}

#[test]
fn compare_cuntz_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_fixture(&dir, "a.json", BLOCKS_23);
    let b = write_fixture(&dir, "b.json", BLOCKS_23_OTHER);
    let c = write_fixture(&dir, "c.json", BLOCKS_5);
    let out = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--mode", "cuntz"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "YES");
    assert_eq!(report["results"]["invariants"]["p"]["block_sizes"], serde_json::json!([2, 3]));

    let out = run(&["compare", a.to_str().unwrap(), c.to_str().unwrap(), "--mode", "cuntz"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "NO");

    // Non-essential input is a precondition failure.
    let f = write_fixture(&dir, "f.json", FAMILY_13);
    let out = run(&["compare", a.to_str().unwrap(), f.to_str().unwrap(), "--mode", "cuntz"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_graph_and_weighted_modes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", TWO_STATE);
    let q = write_fixture(&dir, "q.json", r#"{"rows":[["3/4","1/4"],["1/2","1/2"]]}"#);
    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "graph"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["results"]["verdict"]["answer"], "YES");

    let out = run(&["compare", p.to_str().unwrap(), q.to_str().unwrap(), "--mode", "weighted"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["verdict"]["answer"], "YES");
    // sigma is reported as a state-label mapping.
    assert_eq!(report["results"]["verdict"]["sigma"]["a"], "1");
    assert_eq!(report["results"]["verdict"]["sigma"]["b"], "0");
}

#[test]
fn fock_checks_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", TWO_STATE);
    let perm = write_fixture(&dir, "perm.json", PERM2);

    let out = run(&["fock", p.to_str().unwrap(), "--check", "qprojection", "--degree", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["all_zero"], true);

    let out = run(&["fock", p.to_str().unwrap(), "--check", "coisometry"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["results"]["all_zero"], true);

    let out = run(&["fock", p.to_str().unwrap(), "--check", "cm"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["results"]["converged"], true);

    let out = run(&["fock", perm.to_str().unwrap(), "--check", "twgap"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert!(report["results"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["max_gap"] == 0.0));

    let out = run(&["fock", p.to_str().unwrap(), "--check", "adjoint"]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["fock", p.to_str().unwrap(), "--check", "cesaro"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["results"]["converged"], true);

    // Degree cap is enforced.
    let out = run(&["fock", p.to_str().unwrap(), "--check", "qprojection", "--degree", "40"]);
    assert_eq!(out.status.code(), Some(1));

    // A window too short for convergence yields exit 2.
    let out = run(&["fock", p.to_str().unwrap(), "--check", "cm", "--window", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_rejects_degenerate_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", TWO_STATE);
    let out = run(&[
        "compare",
        p.to_str().unwrap(),
        p.to_str().unwrap(),
        "--mode",
        "eq31",
        "--max-degree",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_fixture(&dir, "p.json", TWO_STATE);
    let first = run(&["analyze", p.to_str().unwrap(), "--stationary", "--cyclic"]);
    let second = run(&["analyze", p.to_str().unwrap(), "--stationary", "--cyclic"]);
    assert_eq!(first.stdout, second.stdout);

    let q = write_fixture(&dir, "q.json", FAMILY_15);
    let p2 = write_fixture(&dir, "p2.json", FAMILY_13);
    let first = run(&["compare", p2.to_str().unwrap(), q.to_str().unwrap(), "--mode", "eq31"]);
    let second = run(&["compare", p2.to_str().unwrap(), q.to_str().unwrap(), "--mode", "eq31"]);
    assert_eq!(first.stdout, second.stdout);

    let first = run(&["fock", p.to_str().unwrap(), "--check", "adjoint"]);
    let second = run(&["fock", p.to_str().unwrap(), "--check", "adjoint"]);
    assert_eq!(first.stdout, second.stdout);
}
