use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn kcascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcascade")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = stdout(o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, body)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn precision_two_steps() {
    let o = kcascade(&["precision", "--m", "2", "--lambda-e", "1", "--lambda-w", "1", "--rho0", "1", "--kmax", "2", "--sample", "all"]);
    assert!(o.status.success());
    let (h, body) = rows(&o);
    assert_eq!(h, ["k", "rho", "denom", "gamma_1", "alpha_1", "alpha_2"]);
    assert_eq!(body.len(), 2);
    let rho: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(rho[0], 1.2);
    assert!((rho[1] - 1.371233).abs() < 1e-6);
}

#[test]
fn precision_degenerate_cases() {
    let o = kcascade(&["precision", "--m", "1", "--lambda-e", "0.5", "--rho0", "3", "--kmax", "50", "--sample", "all"]);
    let (_, body) = rows(&o);
    for r in &body {
        let k: f64 = r[0].parse().unwrap();
        assert_eq!(r[1].parse::<f64>().unwrap(), 3.0 + 2.0 * k);
    }

    let o = kcascade(&["precision", "--m", "3", "--regime", "zeroed", "--kmax", "100", "--sample", "all"]);
    let (_, body) = rows(&o);
    let rho: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
    for w in rho.windows(2) {
        assert!((w[1] - w[0] - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn csv_reals_carry_seventeen_digits() {
    let o = kcascade(&["precision", "--kmax", "10"]);
    let (_, body) = rows(&o);
    for r in &body {
        let mantissa = r[1].split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{}", r[1]);
    }
}

#[test]
fn rate_reports() {
    let o = kcascade(&["rate", "--kmax", "1000000"]);
    assert!(o.status.success());
    let (h, body) = rows(&o);
    for name in ["beta_hat", "beta_theory", "constant_hat", "constant_theory", "r_squared", "rel_err_beta", "rel_err_constant"] {
        col(&h, name);
    }
    let rel: f64 = body[0][col(&h, "rel_err_beta")].parse().unwrap();
    assert!(rel <= 0.06);

    let o = kcascade(&["rate", "--regime", "scaled", "--delta", "1", "--kmax", "10000", "--format", "json"]);
    assert_eq!(json(&o)["results"][0]["beta_theory"], 1.0);

    let o = kcascade(&["rate", "--m", "3", "--lambda-w", "0.5,1.5", "--regime", "scaled", "--delta", "2", "--kmax", "10000", "--format", "json"]);
    let c = json(&o)["results"][0]["constant_theory"].as_f64().unwrap();
    assert!((c - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn rate_rejects_bounded_regime() {
    let o = kcascade(&["rate", "--regime", "scaled-last", "--delta", "1", "--kmax", "1000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn montecarlo_needs_seed_and_is_reproducible() {
    let o = kcascade(&["montecarlo", "--paths", "100", "--kmax", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let args = ["montecarlo", "--m", "3", "--paths", "2000", "--checkpoints", "0,1,10,100", "--seed", "42", "--format", "json"];
    let a = kcascade(&args);
    let b = kcascade(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc = json(&a);
    assert_eq!(doc["config"]["mc"]["seed"], 42);
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    assert_eq!(results[0]["predicted_var"], 1.0);
    assert!(results.iter().all(|r| r["status"] == "pass"));
}

#[test]
fn montecarlo_scaled_is_diagnostic() {
    let o = kcascade(&["montecarlo", "--regime", "scaled", "--delta", "0.5", "--paths", "200", "--kmax", "100", "--seed", "1"]);
    assert!(o.status.success());
    let (h, body) = rows(&o);
    assert!(body.iter().all(|r| r[col(&h, "status")] == "diagnostic"));
}

#[test]
fn riccati_presets() {
    let o = kcascade(&["riccati", "--delta", "1", "--kmax", "100000", "--format", "json"]);
    let r = &json(&o)["results"][0];
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    assert!((r["predicted_limit"].as_f64().unwrap() - golden).abs() < 1e-12);
    assert!(r["rel_err"].as_f64().unwrap() < 0.05);
    assert!((r["fixed_point"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);

    let o = kcascade(&["riccati", "--c", "1", "--n", "2", "--f", "affine:2", "--kmax", "1000000", "--format", "json"]);
    let r = &json(&o)["results"][0];
    assert!(r["rel_err"].as_f64().unwrap() < 0.05);
    assert!(r["fixed_point"].is_null());

    for bad in ["quadratic", "power:2", "affine", "affine:-1"] {
        assert_eq!(kcascade(&["riccati", "--f", bad]).status.code(), Some(2), "{bad}");
    }
    assert_eq!(kcascade(&["riccati", "--delta", "1.5"]).status.code(), Some(2));
}

#[test]
fn gaussian_check_passes() {
    let o = kcascade(&["gaussian-check", "--samples", "20000"]);
    assert!(o.status.success());
    let (h, body) = rows(&o);
    assert_eq!(body[0][col(&h, "status")], "pass");
    assert_eq!(kcascade(&["gaussian-check", "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_two() {
    for args in [
        &["precision", "--lambda-e", "0"][..],
        &["precision", "--m", "3", "--lambda-w", "1,2,3"],
        &["precision", "--m", "0"],
        &["precision", "--delta", "0.5"],
        &["precision", "--kmax", "0"],
        &["precision", "--sample", "sometimes"],
        &["bogus"],
        &["verify", "--lambda-e", "0"],
    ] {
        let o = kcascade(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = kcascade(&["verify", "--lambda-e", "0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda_e"));
    assert_eq!(kcascade(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"m": 3, "lambda-w": [2.0, 0.5], "kmax": 5, "sample": "all", "format": "json"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let doc = json(&kcascade(&["precision", "--config", cfg]));
    assert_eq!(doc["config"]["cascade"]["m"], 3);
    assert_eq!(doc["config"]["cascade"]["lambda_w"], serde_json::json!([2.0, 0.5]));
    assert_eq!(doc["results"].as_array().unwrap().len(), 5);

    let doc = json(&kcascade(&["precision", "--config", cfg, "--kmax", "2", "--lambda-w", "1"]));
    assert_eq!(doc["results"].as_array().unwrap().len(), 2);
    assert_eq!(doc["config"]["cascade"]["lambda_w"], serde_json::json!([1.0, 1.0]));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"lambda_e": 1}"#).unwrap();
    assert_eq!(kcascade(&["precision", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(kcascade(&["precision", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = kcascade(&["precision", "--kmax", "3", "--sample", "all", "--output", path.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("k,rho,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_quick_table() {
    let start = Instant::now();
    let o = kcascade(&["verify", "--quick"]);
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let (h, body) = rows(&o);
    assert!(body.len() >= 10);
    let status = col(&h, "status");
    let all_pass = body.iter().all(|r| r[status] == "pass");
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
    assert!(body.iter().any(|r| r[0] == "1a") && !body.iter().any(|r| r[0] == "2a"));
}
