use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn mf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mf")).args(args).output().expect("mf runs")
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = mf(args);
    let report: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{args:?}: bad report ({e}): {}", String::from_utf8_lossy(&out.stderr)));
    (out.status.code().expect("exit code"), report)
}

#[test]
fn verify_products_is_green() {
    let (code, r) = run(&["verify", "--input", &fixture("products.json"), "--no-timestamp"]);
    assert_eq!(code, 0, "{r:#}");
    assert_eq!(r["status"], "pass");
    assert_eq!(r["schema_version"], 1);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(r["input"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn oracle_and_extend_agree() {
    let input = fixture("products.json");
    let (oc, o) = run(&["oracle", "--input", &input, "--no-timestamp"]);
    let (ec, e) = run(&["extend", "--input", &input, "--no-timestamp"]);
    assert_eq!((oc, ec), (0, 0));
    assert_eq!(o["report"]["feasible"], true);
    assert!(e["report"]["max_consistency_gap"].as_f64().unwrap() <= 1e-9);
    assert_eq!(e["report"]["steps"].as_array().unwrap().len(), 5);

    let input = fixture("triangle.json");
    let (oc, o) = run(&["oracle", "--input", &input, "--no-timestamp"]);
    let (ec, e) = run(&["extend", "--input", &input, "--no-timestamp"]);
    assert_eq!((oc, ec), (1, 1));
    assert_eq!(o["report"]["feasible"], false);
    assert_eq!(e["status"], "fail");
}

#[test]
fn correct_reports_the_blend() {
    let (code, r) = run(&["correct", "--input", &fixture("nu.json"), "--no-timestamp"]);
    assert_eq!(code, 0);
    let xi: Vec<f64> = serde_json::from_value(r["report"]["xi"]["table"].clone()).unwrap();
    for (x, e) in xi.iter().zip([0.16, 0.34, 0.34, 0.16]) {
        assert!((x - e).abs() < 1e-12);
    }
    let (code, r) = run(&["correct", "--input", &fixture("nu_negative.json"), "--no-timestamp"]);
    assert_eq!(code, 1);
    assert_eq!(r["reason"], "negative_cell");
}

#[test]
fn paint_step_on_the_fixture_tower() {
    let (code, r) = run(&["paint", "--input", &fixture("tower.json"), "--m", "2", "--no-timestamp"]);
    assert_eq!(code, 0, "{:#}", r["checks"]);
    assert_eq!(r["report"]["max_distribution_gap"], 0.0);
}

#[test]
fn krengel_two_steps() {
    let (code, r) = run(&[
        "krengel",
        "--input",
        &fixture("tall_tower.json"),
        "--times",
        "1,2,3,4,5,6",
        "--steps",
        "2",
        "--eta",
        "0.002",
        "--no-timestamp",
    ]);
    assert_eq!(code, 0, "{:#}", r["checks"]);
    assert_eq!(r["report"]["times"], serde_json::json!([1, 2]));
}

#[test]
fn counterexample_numbers() {
    let (code, r) = run(&["counterexample", "--W", "10001", "--n", "10", "--no-timestamp"]);
    assert_eq!(code, 0);
    let c = &r["report"]["counterexample"];
    assert!((c["shift_distance"].as_f64().unwrap() - 0.0040).abs() < 5e-5);
    assert_eq!(c["conventions"].as_array().unwrap().len(), 3);
    assert!(c["contradiction_margin"].as_f64().unwrap() >= 0.47);

    let (code, r) = run(&["counterexample", "--W", "11", "--samples", "1000", "--no-timestamp"]);
    assert_eq!(code, 1);
    assert_eq!(r["reason"], "shift_distance");
}

#[test]
fn experiment_file_with_cylinders() {
    let (code, r) = run(&["counterexample", "--input", &fixture("experiment.json"), "--no-timestamp"]);
    assert_eq!(code, 0);
    let mixing = r["report"]["mixing"].as_array().unwrap();
    let values: Vec<f64> = mixing[0]["distribution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[0].as_f64().unwrap())
        .collect();
    assert_eq!(values, vec![0.0, 0.125]);
    assert_eq!(mixing[1]["max_abs"], 0.0);
}

#[test]
fn reports_are_deterministic() {
    let args = ["counterexample", "--input", &fixture("experiment.json"), "--no-timestamp"];
    let a = mf(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_mf"))
        .args(args)
        .env("MF_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    let stamped = mf(&["counterexample", "--W", "101", "--samples", "100"]);
    let v: Value = serde_json::from_slice(&stamped.stdout).unwrap();
    assert!(v["generated_at_unix"].is_u64());
}

#[test]
fn output_flag_writes_the_report() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("verify-report.json");
    let out = mf(&["verify", "--input", &fixture("products.json"), "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "verify");
}

#[test]
fn usage_failures_exit_two() {
    let bad = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("malformed.json");
    std::fs::write(&bad, "{\"alphabet_size\": 2,\n \"alpha\": }").unwrap();
    let (code, r) = run(&["verify", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(r["reason"], "malformed_input");
    assert!(r["message"].as_str().unwrap().contains("line 2"));

    let (code, r) = run(&["oracle"]);
    assert_eq!((code, r["reason"].as_str()), (2, Some("usage")));

    let (code, r) = run(&["counterexample", "--W", "4"]);
    assert_eq!((code, r["reason"].as_str()), (2, Some("domain")));

    let (code, r) = run(&["verify", "--input", "/nonexistent/family.json"]);
    assert_eq!((code, r["reason"].as_str()), (2, Some("io")));

    let out = Command::new(env!("CARGO_BIN_EXE_mf"))
        .args(["counterexample"])
        .env("MF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(mf(&["no-such-command"]).status.code(), Some(2));
}
