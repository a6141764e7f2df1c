use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polaron(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polaron")).args(args).output().expect("binary runs")
}

fn report(args: &[&str], dir: &Path, name: &str) -> (i32, Value) {
    let path = dir.join(name);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap();
    all.extend(["--output", p]);
    let out = polaron(&all);
    let code = out.status.code().unwrap();
    let v = std::fs::read_to_string(&path).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or(Value::Null);
    (code, v)
}

#[test]
fn verify_all_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = report(&["verify", "--suite", "all", "--n", "3", "--seed", "7"], dir.path(), "v.json");
    assert_eq!(code, 0);
    assert_eq!(v["failed"], 0);
    let suites: std::collections::BTreeSet<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["suite"].as_str().unwrap()).collect();
    assert_eq!(suites.len(), 8);
}

#[test]
fn reports_are_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    report(&["verify", "--suite", "all", "--n", "2", "--seed", "5"], dir.path(), "a.json");
    report(&["verify", "--suite", "all", "--n", "2", "--seed", "5", "--jobs", "3"], dir.path(), "b.json");
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn jw_on_nondiagonal_boundaries_is_a_config_error() {
    let out = polaron(&["verify", "--suite", "jw"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagonal"));
    assert_eq!(polaron(&["verify", "--suite", "jw", "--diagonal"]).status.code(), Some(0));
}

#[test]
fn tampered_tolerance_fails_in_a_controlled_way() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = report(&["verify", "--suite", "rmatrix", "--tol", "1e-30"], dir.path(), "t.json");
    assert_eq!(code, 1);
    assert_eq!(v["failed"], 4);
}

#[test]
fn spectrum_guard_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = report(&["spectrum", "--n", "2"], dir.path(), "s.json");
    assert_eq!(code, 0);
    let recs = v["data"]["records"].as_array().unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r["matched"] == true));
    let (code, v) = report(&["spectrum", "--n", "3", "--diagonal"], dir.path(), "d.json");
    assert_eq!(code, 0);
    let recs = v["data"]["records"].as_array().unwrap();
    assert_eq!(recs.len(), 8);
    assert!(recs.iter().all(|r| r["lambda_g"] == serde_json::json!([0.0, 0.0])));
    assert_eq!(polaron(&["spectrum", "--n", "7"]).status.code(), Some(2));
}

#[test]
fn vacuum_and_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = report(&["vacuum", "--n", "8"], dir.path(), "v.json");
    assert_eq!(code, 0);
    assert!(v["checks"][0]["value"].as_f64().unwrap() <= 1e-11);
    assert!(v["data"]["state"].as_object().unwrap().contains_key("00000000"));
    let (code, v) = report(&["fusion", "--level", "2"], dir.path(), "f.json");
    assert_eq!(code, 0);
    assert!((v["data"]["eta_n"].as_f64().unwrap() - std::f64::consts::PI / 6.0).abs() < 1e-15);
    assert_eq!(polaron(&["fusion", "--level", "0"]).status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"params": {"n": 2, "eta": [0.25, 0.05], "psi_minus": [0.6, 0.1], "psi_plus": [0.9, -0.2]}, "seed": 11}"#)
        .unwrap();
    let c = cfg.to_str().unwrap();
    let (code, v) = report(&["verify", "--suite", "vacuum", "--config", c, "--n", "4"], dir.path(), "r.json");
    assert_eq!(code, 0);
    assert_eq!(v["config"]["params"]["n"], 4);
    assert_eq!(v["config"]["params"]["eta"], serde_json::json!([0.25, 0.05]));
    assert_eq!(v["seed"], 11);
    std::fs::write(&cfg, r#"{"params": {"n": 2, "eta": [0.0, 0.0], "psi_minus": [0.6, 0.1], "psi_plus": [0.9, -0.2]}}"#).unwrap();
    assert_eq!(polaron(&["verify", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(polaron(&["verify", "--config", c]).status.code(), Some(2));
}

#[test]
fn bethe_marks_physical_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = report(&["bethe", "--m", "1", "--n", "2"], dir.path(), "b.json");
    assert_eq!(code, 0);
    let sols = v["data"]["solutions"].as_array().unwrap();
    assert!(!sols.is_empty());
    assert!(sols.iter().any(|s| s["in_spectrum"] == true));
    assert_eq!(polaron(&["bethe", "--m", "3", "--n", "2"]).status.code(), Some(2));
}

#[test]
fn report_summarizes_files() {
    let dir = tempfile::tempdir().unwrap();
    report(&["verify", "--suite", "algebra"], dir.path(), "ok.json");
    report(&["verify", "--suite", "algebra", "--tol", "1e-30"], dir.path(), "bad.json");
    let ok = dir.path().join("ok.json");
    let bad = dir.path().join("bad.json");
    let out = polaron(&["report", ok.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = polaron(&["report", ok.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL algebra/"));
}
