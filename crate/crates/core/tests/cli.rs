mod common;

use std::path::Path;
use std::process::{Command, Output};

use migrate_core::lbbd::SolveReport;
use migrate_core::oracle::OracleResult;

fn migrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(args)
        .output()
        .expect("run migrate")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = migrate(&["generate", "--seed", "7", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let stdout = migrate(&["generate", "--seed", "7"]);
    assert_eq!(stdout.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn solve_single_pair() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("x.json");
    common::single_pair_instance().save(&inst).unwrap();
    let sol = dir.path().join("x.solution.json");
    let csv = dir.path().join("x.csv");
    let o = migrate(&["solve", "--instance", path(&inst), "--gap", "0.10", "--csv", path(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: SolveReport = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(report.upper_bound_cents, Some(163200));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("single-pair,optimal,163200,163200,"), "{row}");

    // recomputing the report from the solution file reproduces it
    let again = dir.path().join("again.csv");
    let o = migrate(&["report", path(&sol), "--out", path(&again)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), text);
}

#[test]
fn malformed_instance_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.json");
    std::fs::write(&inst, "{ \"sites\": [").unwrap();
    let o = migrate(&["solve", "--instance", path(&inst)]);
    assert_eq!(o.status.code(), Some(1));
    let o = migrate(&["solve", "--instance", path(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(migrate(&["solve"]).status.code(), Some(1));
    assert_eq!(migrate(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(migrate(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_limits() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("x.json");
    common::single_pair_instance().save(&inst).unwrap();
    let o = migrate(&["oracle", "--instance", path(&inst), "--oracle-limits", "1,6,2,2"]);
    assert_eq!(o.status.code(), Some(2));

    let out = dir.path().join("o.json");
    let o = migrate(&["oracle", "--instance", path(&inst), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let res: OracleResult = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&res).unwrap();
    assert_eq!(v["cost_cents"], 163200);
}
