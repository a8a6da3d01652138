//! End-to-end checks of the `fxinsure` binary: output formats and exit codes.

use std::process::{Command, Output};

fn fxinsure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fxinsure"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn solve_emits_csv() {
    let out = fxinsure(&["solve", "--market", "gbm", "--grid", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,K,L,J,h,pi_star,V"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn simulate_emits_json() {
    let out = fxinsure(&[
        "simulate", "--market", "domestic", "--paths", "200", "--steps", "32", "--seed", "3",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["estimate"].as_f64().unwrap() < 1.0);
    assert_eq!(v["paths"].as_u64(), Some(200));
    assert_eq!(v["strategy"].as_str(), Some("optimal"));
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--paths", "300", "--steps", "16", "--seed", "9"];
    let a = fxinsure(&args);
    let b = fxinsure(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_succeeds_on_defaults() {
    let out = fxinsure(&["verify", "--grid", "501"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn compare_reports_orderings() {
    let out = fxinsure(&["compare"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("foreign above domestic"));
}

#[test]
fn reproduce_writes_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = fxinsure(&["reproduce", "--table", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    for name in ["strategies_2.csv", "values_2.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.lines().count() > 100, "{name} should hold the full curve");
    }
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"T": 4}"#).unwrap();
    let out = fxinsure(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn invalid_strategy_exits_one() {
    let out = fxinsure(&["simulate", "--strategy", "bogus", "--paths", "10", "--steps", "4"]);
    assert_eq!(out.status.code(), Some(1));
}
