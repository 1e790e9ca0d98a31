use std::path::Path;
use std::process::{Command, Output};

use maslovkit::cli::builtin_model;

fn maslovkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maslovkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn emit(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    let out = maslovkit(&["model", name, "--emit", path.to_str().unwrap()]);
    assert!(out.status.success());
    path.to_str().unwrap().to_string()
}

#[test]
fn sphere_scenario_exits_zero_and_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = emit(dir.path(), "sphere");
    let out_dir = dir.path().join("report");
    let out = maslovkit(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["events.csv", "maslov.csv", "verdicts.csv", "run.json"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    let events = std::fs::read_to_string(out_dir.join("events.csv")).unwrap();
    assert_eq!(
        events.lines().next().unwrap(),
        "reference,t,multiplicity,n_minus,n_plus,signature,degenerate"
    );
    let conjugate: Vec<f64> = events
        .lines()
        .filter(|l| l.starts_with("L0,"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(conjugate.len(), 3);
    let verdicts = std::fs::read_to_string(out_dir.join("verdicts.csv")).unwrap();
    assert!(!verdicts
        .lines()
        .skip(1)
        .any(|l| l.split(',').nth(3) == Some("false")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = emit(dir.path(), "lorentz-const");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(
            maslovkit(&["run", &scenario, "--out", out.to_str().unwrap()])
                .status
                .success()
        );
    }
    for file in ["events.csv", "maslov.csv", "verdicts.csv", "run.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn malformed_signature_exits_two_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_model("flat", 3, None).unwrap();
    s.signature[1] = 2.0;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_json()).unwrap();
    let out = maslovkit(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("signature[1]"));
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"dimension\": [\n}").unwrap();
    let out = maslovkit(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn non_symmetric_curvature_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = emit(dir.path(), "flat");
    let text = std::fs::read_to_string(&scenario).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["curvature"]["coefficients"][0][1] = serde_json::json!(1.0);
    std::fs::write(&scenario, value.to_string()).unwrap();
    let out = maslovkit(&[
        "run",
        &scenario,
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("curvature"));
}

#[test]
fn props_contract() {
    assert_eq!(
        maslovkit(&["props", "--trials", "0"]).status.code(),
        Some(2)
    );
    let first = maslovkit(&["props", "--seed", "42", "--trials", "20", "--dims", "1,2,3"]);
    assert_eq!(first.status.code(), Some(0));
    let second = maslovkit(&["props", "--seed", "42", "--trials", "20", "--dims", "1,2,3"]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn unknown_model_is_input_error() {
    assert_eq!(maslovkit(&["model", "torus"]).status.code(), Some(2));
}
