//! Exit-code and output contract of the installed binary.

mod common;

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbverify"))
}

fn fixture(name: &str) -> String {
    common::fixture_dir().join(name).to_string_lossy().into_owned()
}

#[test]
fn all_safe_exits_zero() {
    let out = bin().args(["verify", &fixture("time.rbl")]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{}", text);
    assert!(text.contains("Time instance method incr_sec is safe."), "{}", text);
}

#[test]
fn verification_failure_exits_one() {
    let out = bin()
        .args(["verify", &fixture("aggregate_bad.rbl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Aggregate instance method << is unsafe."), "{}", text);
}

#[test]
fn usage_error_exits_two() {
    let out = bin().args(["verify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["verify", "--array-bound", "0", &fixture("time.rbl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_error_exits_three() {
    let out = bin().args(["verify", "/nonexistent/x.rbl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_output_is_machine_readable() {
    let out = bin()
        .args(["verify", "--json", &fixture("time.rbl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["methods"].as_array().unwrap().len(), 4);
    assert_eq!(v["methods"][0]["verdict"], "SAFE");
}

#[test]
fn label_filter_selects_methods() {
    // Only `<<` in aggregate.rbl carries `verify: :bind`.
    let out = bin()
        .args(["verify", "--label", "bind", &fixture("aggregate.rbl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 1, "{}", text);
    let out = bin()
        .args(["verify", "--label", "nomatch", &fixture("aggregate.rbl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn dump_writes_smt_artifacts_without_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "dump",
            "--dump-smt",
            dir.path().to_str().unwrap(),
            &fixture("time.rbl"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(
        names.iter().any(|n| n.starts_with("Time_incr_sec.") && n.ends_with(".smt2")),
        "{:?}",
        names
    );
}
