use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskeig"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn f(v: &Value) -> f64 {
    match v {
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        _ => v.as_f64().expect("number"),
    }
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().expect("array").iter().map(f).collect()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn solve_two_state_reports_log_three_halves() {
    let r = report(&["solve", &fixture("two_state.json")]);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["log_base"], "natural");
    assert_eq!(r["result"]["mode"], "irreducible");
    assert!((f(&r["result"]["log_rho"]) - 1.5f64.ln()).abs() < 1e-9);
}

#[test]
fn solve_matches_closed_forms() {
    let cases = [
        ("dominating.json", ((1f64.exp().powi(2) + 1.0) / 2.0).ln()),
        ("complete4.json", 4f64.ln()),
        ("two_cycle.json", 0.0),
    ];
    for (name, expect) in cases {
        let r = report(&["solve", &fixture(name)]);
        let got = f(&r["result"]["log_rho"]);
        assert!((got - expect).abs() < 1e-9, "{name}: {got} vs {expect}");
    }
}

#[test]
fn bad_row_sum_is_a_validation_error_naming_the_row() {
    let out = run(&["validate", &fixture("bad_rowsum.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(0,a)"), "{err}");
}

#[test]
fn oracle_on_triangular() {
    let r = report(&["oracle", &fixture("triangular.json")]);
    let lambda = floats(&r["result"]["lambda_star"]);
    assert!(lambda[0].abs() < 1e-12);
    assert!((lambda[1] - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn reducible_instance_dispatches_to_the_reducible_solver() {
    let r = report(&["solve", &fixture("chained.json")]);
    assert_eq!(r["result"]["mode"], "reducible");
    assert_eq!(floats(&r["result"]["growth"]["lambda_star"]), vec![0.0, 0.0]);
    assert_eq!(r["result"]["dp"]["v"][1], "-inf");
    assert_eq!(r["result"]["dp"]["clean"], true);
}

#[test]
fn forced_reducible_agrees_with_the_eigenvalue() {
    let r = report(&["solve", &fixture("two_state.json"), "--force-reducible"]);
    assert_eq!(r["result"]["mode"], "reducible");
    for l in floats(&r["result"]["growth"]["lambda_star"]) {
        assert!((l - 1.5f64.ln()).abs() < 1e-9);
    }
}

#[test]
fn classify_reports_two_classes_for_triangular() {
    let r = report(&["classify", &fixture("triangular.json")]);
    assert_eq!(r["result"]["irreducible"], false);
    assert_eq!(r["result"]["classes"].as_array().unwrap().len(), 2);
}

#[test]
fn dv_objective_reaches_log_lambda() {
    let r = report(&["dv", &fixture("two_state.json")]);
    assert!((f(&r["result"]["objective"]) - 1.5f64.ln()).abs() < 1e-9);
}

#[test]
fn occupation_certificate_is_feasible() {
    let r = report(&["occupation", &fixture("dominating.json")]);
    let log_rho = f(&r["result"]["log_rho"]);
    assert!((f(&r["result"]["objective"]) - log_rho).abs() < 1e-9);
    assert_eq!(r["result"]["dual"]["feasible"], true);
}

#[test]
fn identical_inputs_give_identical_payloads() {
    let args = [
        "eval",
        &fixture("dominating.json"),
        "--horizons",
        "5,50",
        "--mc-samples",
        "500",
        "--seed",
        "7",
    ];
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("wall_time_ms");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(report(&args)), strip(report(&args)));
    let sim = ["simulate", &fixture("two_state.json"), "--steps", "50", "--seed", "3"];
    assert_eq!(strip(report(&sim)), strip(report(&sim)));
}

#[test]
fn emitted_policy_and_eigenvector_reload() {
    let inst = fixture("dominating.json");
    let r = report(&["solve", &inst]);
    let policy = scratch("dominating_optimal_policy.json");
    std::fs::write(&policy, r["result"]["policy"].to_string()).unwrap();
    let psi = scratch("dominating_psi.json");
    std::fs::write(&psi, r["result"]["psi"].to_string()).unwrap();

    let log_rho = f(&r["result"]["log_rho"]);
    let e = report(&["eval", &inst, "--policy", policy.to_str().unwrap(), "--horizons", "2000"]);
    for v in floats(&e["result"]["limit_estimate"]) {
        assert!((v - log_rho).abs() < 1e-3);
    }
    let b = report(&["bounds", &inst, "--vector", psi.to_str().unwrap()]);
    assert!(f(&b["result"]["log_lower"]) <= log_rho + 1e-9);
    assert!(f(&b["result"]["log_upper"]) >= log_rho - 1e-9);
    assert!(f(&b["result"]["log_upper"]) - f(&b["result"]["log_lower"]) < 1e-8);
}

#[test]
fn negative_infinity_is_a_string_marker() {
    let r = report(&["simulate", &fixture("two_cycle.json"), "--steps", "20"]);
    for reward in r["result"]["rewards"].as_array().unwrap() {
        assert!(reward.is_number() || reward == "-inf");
    }
}

#[test]
fn digest_tracks_file_contents() {
    let a = report(&["validate", &fixture("two_state.json")]);
    let b = report(&["validate", &fixture("triangular.json")]);
    let d = a["instance_digest"].as_str().unwrap();
    assert_eq!(d.len(), 64);
    assert!(d.chars().all(|c| c.is_ascii_hexdigit()));
    assert_ne!(a["instance_digest"], b["instance_digest"]);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        run(&["solve", &fixture("two_state.json"), "--nope"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_three_with_a_report() {
    let out = run(&["solve", &fixture("dominating.json"), "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["converged"], false);
    let [lo, hi] = [0, 1].map(|k| f(&r["result"]["log_rho_bracket"][k]));
    let exact = ((1f64.exp().powi(2) + 1.0) / 2.0).ln();
    assert!(lo <= exact && exact <= hi);
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(run(&["validate", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn fixture_files_match_the_library_fixtures() {
    use riskeig_core::{fixtures, model::parse_instance, policy_matrix, Policy};
    let pairs = [
        ("two_state.json", fixtures::two_state()),
        ("triangular.json", fixtures::triangular()),
        ("dominating.json", fixtures::dominating()),
        ("complete4.json", fixtures::complete_digraph(4)),
        ("two_cycle.json", fixtures::two_cycle()),
        ("chained.json", fixtures::chained()),
    ];
    for (name, lib) in pairs {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let file = parse_instance(&text).unwrap().instance;
        let a = policy_matrix(&file, &Policy::uniform(&file)).to_rows();
        let b = policy_matrix(&lib, &Policy::uniform(&lib)).to_rows();
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12, "{name}");
            }
        }
        assert_eq!(a.len(), b.len(), "{name}");
    }
}
