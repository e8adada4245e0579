use std::path::Path;

use eggkernel::cli::{run, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK};
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("eggkernel").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = invoke(args);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).expect("valid JSON")
}

fn calibrated_settings(dir: &Path) -> String {
    let path = dir.join("settings.json");
    let p = path.to_str().unwrap().to_string();
    let (code, _, err) = invoke(&["calibrate", "--settings", &p]);
    assert_eq!(code, EXIT_OK, "{err}");
    p
}

#[test]
fn classify_output() {
    let (code, out, _) = invoke(&["classify", "--m", "1,2", "--z0", "1,0,0,0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        out,
        "{\"z0\":[[1.0000000000000000e0,0.0000000000000000e0],[0.0000000000000000e0,0.0000000000000000e0]],\
         \"I\":[1],\"P\":[2],\"Q\":[1],\"k\":1}\n"
    );
    let (_, csv, _) = invoke(&[
        "classify", "--m", "1,2", "--z0", "1,0,0,0", "--format", "csv",
    ]);
    assert_eq!(csv, "I,P,Q,k\n1,2,1,1\n");
}

#[test]
fn repeated_invocations_are_identical() {
    let args = [
        "eval",
        "--m",
        "1,2",
        "--z",
        "0.6,0,0.1,0.2",
        "--kernel",
        "szego",
    ];
    let (_, a, _) = invoke(&args);
    let (_, b, _) = invoke(&args);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn eval_integral_matches_reference() {
    let v = json(&["eval", "--m", "1,2", "--z", "0.6,0,0,0", "--tol", "1e-10"]);
    let value = v["value"].as_f64().unwrap();
    assert!((value / 0.463_811_570_628_377_25 - 1.0).abs() < 1e-9);
    assert!(v["error_estimate"].as_f64().unwrap() > 0.0);
    assert_eq!(v["settings_digest"].as_str().unwrap().len(), 16);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "domain",
            "z",
            "kernel",
            "method",
            "value",
            "error_estimate",
            "r",
            "settings_digest"
        ]
    );
}

#[test]
fn series_needs_a_calibration_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.json");
    std::fs::write(
        &plain,
        r#"{"tol":1e-8,"max_subdivisions":4000,"precision":"standard"}"#,
    )
    .unwrap();
    let (code, _, err) = invoke(&[
        "eval",
        "--m",
        "1,2",
        "--z",
        "0.3,0,0.2,0",
        "--method",
        "series",
        "--settings",
        plain.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("calibrat"), "{err}");

    let p = calibrated_settings(dir.path());
    let v = json(&[
        "eval",
        "--m",
        "1,2",
        "--z",
        "0.3,0,0.2,0",
        "--method",
        "both",
        "--settings",
        &p,
    ]);
    assert!(v["rel_diff"].as_f64().unwrap() < 1e-6);
    assert!(v["calibration"]["series_constant_ratio"].as_f64().is_some());
}

#[test]
fn leading_and_closed_methods() {
    let dir = tempfile::tempdir().unwrap();
    let p = calibrated_settings(dir.path());
    let z = "0.995,0,0.05,0";
    let lead = json(&[
        "eval", "--m", "1,2", "--z", z, "--z0", "1,0,0,0", "--method", "leading",
    ]);
    let closed = json(&[
        "eval",
        "--m",
        "1,2",
        "--z",
        z,
        "--z0",
        "1,0,0,0",
        "--method",
        "closed",
        "--settings",
        &p,
    ]);
    let a = lead["value"].as_f64().unwrap();
    let b = closed["value"].as_f64().unwrap();
    assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
    let (code, _, err) = invoke(&["eval", "--m", "1,2", "--z", z, "--method", "leading"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--z0"), "{err}");
}

#[test]
fn limit_scan_slope() {
    let v = json(&[
        "limit-scan",
        "--m",
        "1,2",
        "--z0",
        "1,0,0,0",
        "--t",
        "0",
        "--r-from",
        "0.1",
        "--r-to",
        "0.001",
        "--steps",
        "20",
    ]);
    assert!((v["slope_fit"].as_f64().unwrap() + 2.5).abs() < 0.05);
    assert_eq!(v["r_grid"].as_array().unwrap().len(), 20);
    assert_eq!(v["bounded"], Value::Bool(true));

    let (code, csv, _) = invoke(&[
        "limit-scan",
        "--m",
        "1,2",
        "--z0",
        "1,0,0,0",
        "--steps",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,value,leading,residual,error_estimate");
    assert_eq!(lines.len(), 4);
}

#[test]
fn polar_and_admissible_region() {
    let base = [
        "polar",
        "--m",
        "1,2",
        "--z0",
        "1,0,0,0",
        "--z",
        "0.9,0,0.3,0",
    ];
    let v = json(&base);
    let t = v["t"][0].as_f64().unwrap();
    let r = v["r"].as_f64().unwrap();
    assert!((r - (1.0 - 0.81 - 0.0081)).abs() < 1e-15);
    assert!(t > 0.0);
    let mut with_alpha = base.to_vec();
    with_alpha.extend(["--alpha", "2"]);
    let power = json(&with_alpha);
    assert_eq!(power["ualpha_variant"], "power");
    with_alpha.extend(["--ualpha-variant", "sum"]);
    let sum = json(&with_alpha);
    assert_eq!(sum["ualpha_variant"], "sum");
    let (code, _, err) = invoke(&[
        "polar",
        "--m",
        "1,2",
        "--z0",
        "1,0,0,0",
        "--z",
        "0.9,0,0.3,0",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--alpha"), "{err}");
}

#[test]
fn phi_values() {
    let v = json(&["phi", "--m", "1,2", "--z0", "1,0,0,0", "--t", "0"]);
    assert!((v["value"].as_f64().unwrap() - 0.75).abs() < 1e-8);
    let v = json(&[
        "phi", "--m", "1,2", "--z0", "1,0,0,0", "--t", "0", "--kernel", "szego",
    ]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let (code, _, err) = invoke(&["phi", "--m", "1,2", "--z0", "1,0,0,0", "--t", "1.2"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--t"), "{err}");
}

#[test]
fn recursion_check_reports_depth() {
    let v = json(&[
        "recursion-check",
        "--m",
        "1,2,2",
        "--z0",
        "1,0,0,0,0,0",
        "--t0",
        "1,0",
    ]);
    assert_eq!(v["depth"], 2);
    assert!((v["slope_local"].as_f64().unwrap() + 0.5).abs() < 0.05);
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels[1]["P"], serde_json::json!([3]));
    let (code, _, err) = invoke(&[
        "recursion-check",
        "--m",
        "1,2,2",
        "--z0",
        "1,0,0,0,0,0",
        "--t0",
        "0.5,0.5",
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--t0"), "{err}");
}

#[test]
fn estimate_check_constant() {
    let v = json(&[
        "estimate-check",
        "--m",
        "2,3",
        "--z0",
        "0,0,1,0",
        "--t",
        "0.3",
        "--steps",
        "4",
    ]);
    let c = v["constant"].as_f64().unwrap();
    assert!((1.0..=100.0).contains(&c), "{c}");
    assert!(!v["rows"].as_array().unwrap().is_empty());
}

#[test]
fn validation_names_the_flag() {
    let (code, _, err) = invoke(&["eval", "--z", "0.1,0"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--m"), "{err}");
    let (code, _, err) = invoke(&["eval", "--m", "1,2", "--z", "0.1,0,0.2"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--z"), "{err}");
    let (code, _, err) = invoke(&["eval", "--m", "1,2", "--z", "2,0,0,0"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--z"), "{err}");
    let (code, _, err) = invoke(&["eval", "--m", "1,2", "--z", "0.9999995,0,0.01,0"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--z"), "{err}");
    let (code, _, err) = invoke(&[
        "limit-scan",
        "--m",
        "1,2",
        "--z0",
        "1,0,0,0",
        "--r-to",
        "0.5",
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--r-to"), "{err}");
    let (code, _, err) = invoke(&[
        "eval",
        "--m",
        "1,2",
        "--z",
        "0.1,0,0,0",
        "--settings",
        "/nonexistent/s.json",
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--settings"), "{err}");
}

#[test]
fn numeric_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let starved = dir.path().join("starved.json");
    std::fs::write(
        &starved,
        r#"{"tol":1e-13,"max_subdivisions":16,"precision":"standard"}"#,
    )
    .unwrap();
    let (code, _, err) = invoke(&[
        "eval",
        "--m",
        "2,3",
        "--z",
        "0.5,0,0.84,0",
        "--kernel",
        "szego",
        "--settings",
        starved.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_NUMERIC, "{err}");
    assert!(err.contains("quadrature"), "{err}");
}
