use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_query-design"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_bsc_returns_six_queries() {
    let out = run(&["solve", "--instance", &data("bsc.json"), "--epsilon", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["plan"], serde_json::json!([6]));
    assert_eq!(v["cost"], 6.0);
    assert_eq!(v["guarantee"], "guaranteed");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn verify_reports_both_bounds() {
    let out = run(&["verify", "--instance", &data("bsc.json"), "--plan", "[6]"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["feasible"], true);
    let pe = v["exact"]["lowest_index"][0].as_f64().unwrap();
    assert!((pe - 1.27e-3).abs() < 1e-12);
}

#[test]
fn infeasible_plan_exits_with_one() {
    let out = run(&["verify", "--instance", &data("bsc.json"), "--plan", "[2]"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["feasible"], false);
}

#[test]
fn exact_optimum_of_bsc() {
    let out = run(&["exact", "--instance", &data("bsc.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["plan"], serde_json::json!([3]));
    let sur = json(&run(&[
        "exact",
        "--instance",
        &data("bsc.json"),
        "--problem",
        "surrogate",
    ]));
    assert_eq!(sur["plan"], serde_json::json!([6]));
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "--instance",
        &data("bsc.json"),
        "--plan",
        "[6]",
        "--truth",
        "1",
        "--trials",
        "5000",
        "--seed",
        "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["estimate"]["trials"], 5000);
}

#[test]
fn validate_flags_bad_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(data("bsc.json"))
        .unwrap()
        .replace("[0.5, 0.5]", "[0.7, 0.5]");
    std::fs::write(&path, text).unwrap();
    let out = run(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["valid"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn calibrate_builds_valid_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calibrated.json");
    let out = run(&[
        "--output",
        path.to_str().unwrap(),
        "calibrate",
        "--template",
        &data("template.json"),
        "--log",
        &data("responses.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let check = run(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn reduce_setcover_emits_instance() {
    let out = run(&["reduce-setcover", "--sets", &data("setcover.json"), "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["labels"].as_array().unwrap().len(), 5);
    assert_eq!(v["models"][0]["name"], "discriminator");
}

#[test]
fn tightness_sweep_csv() {
    let out = run(&[
        "sweep-tightness",
        "--instance",
        &data("bsc.json"),
        "--alphas",
        "0.1,0.05",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "alpha_min,opt,surrogate_opt,ratio\n0.1,1,5,5\n0.05,3,6,2\n");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one() {
    let out = run(&["solve", "--instance", &data("bsc.json"), "--epsilon", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}
