//! End-to-end tests of the command-line interface: wire formats, exit codes,
//! and the design → verify round trip.

use std::process::{Command, Output};

fn middelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_middelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn design_two_delay_emits_expected_json() {
    let out = middelay(&["design", "--two-delay", "--a0", "0", "--tau1", "1", "--tau2", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(json["s0"], -1.5);
    assert_eq!(json["tau1"], 1.0);
    assert_eq!(json["tau2"], 2.0);
}

#[test]
fn design_verify_round_trip_passes() {
    let dir = std::env::temp_dir().join("middelay-cli-roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let design_path = dir.join("design.json");
    let out = middelay(&[
        "design",
        "--two-delay",
        "--a0",
        "0.5",
        "--tau1",
        "0.8",
        "--tau2",
        "2.1",
        "--output",
        design_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let out = middelay(&["verify", "--input", design_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["multiplicity"]["passed"], true);
    assert_eq!(report["dominance"]["passed"], true);
    assert_eq!(report["dominance"]["roots_right_of_s0"], 0);
}

#[test]
fn spectrum_emits_csv_with_header() {
    // integrator with one-delay feedback: double root at -e
    let qp = r#"{"terms":[{"coeffs":[0.0,1.0],"delay":0.0},{"coeffs":[1.0],"delay":0.36787944117144233}]}"#;
    let out = middelay(&[
        "spectrum", "--input", qp, "--re-min", "-6", "--re-max", "1", "--im-min", "-20",
        "--im-max", "20",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = stdout_of(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im,multiplicity,residual"));
    let first = lines.next().expect("at least one root");
    let fields: Vec<&str> = first.split(',').collect();
    let re: f64 = fields[0].parse().unwrap();
    let multiplicity: u32 = fields[2].parse().unwrap();
    assert!((re + std::f64::consts::E).abs() < 1e-6, "rightmost root at {re}");
    assert_eq!(multiplicity, 2);
}

#[test]
fn spectrum_rejects_malformed_input_with_exit_2() {
    let out = middelay(&["spectrum", "--input", r#"{"terms": "nonsense"}"#]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr_of(&out).trim()).unwrap();
    assert_eq!(err["code"], "invalid_input");
    assert!(err["message"].as_str().unwrap().contains("invalid quasipolynomial"));
}

#[test]
fn spectrum_rejects_unordered_delays_with_exit_2() {
    let qp = r#"{"terms":[{"coeffs":[1.0],"delay":1.0},{"coeffs":[1.0],"delay":0.5}]}"#;
    let out = middelay(&["spectrum", "--input", qp]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_linear_emits_trajectory_csv() {
    let sys = r#"{"a0":1.0,"a1":0.0,"a2":0.0,"tau1":1.0,"tau2":2.0}"#;
    let out = middelay(&[
        "simulate",
        "--linear",
        sys,
        "--history-const",
        "1.0",
        "--t-end",
        "2.0",
        "--dt",
        "0.1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = stdout_of(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,y"));
    let last = csv.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    let t: f64 = fields[0].parse().unwrap();
    let y: f64 = fields[1].parse().unwrap();
    assert!((t - 2.0).abs() < 1e-9);
    assert!((y - (-2.0f64).exp()).abs() < 1e-6);
}

#[test]
fn optimize_one_delay_reports_closed_form() {
    let out = middelay(&["optimize", "--family", "one-delay", "--bound", "1.0"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let abscissa = json["abscissa"].as_f64().unwrap();
    assert!((abscissa + std::f64::consts::E).abs() < 1e-9);
    assert_eq!(json["family"], "one_delay");
}

#[test]
fn optimize_rejects_unknown_family_with_exit_2() {
    let out = middelay(&["optimize", "--family", "three-delay"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn branch_emits_csv_path() {
    let out = middelay(&[
        "branch",
        "--lambda-start",
        "0.5",
        "--lambda-end",
        "0.7",
        "--steps",
        "50",
        "--start-re",
        "-2.0",
        "--start-im",
        "9.0",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = stdout_of(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,re,im,residual"));
    assert_eq!(csv.lines().count(), 52); // header + 51 points
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let lambda: f64 = last[0].parse().unwrap();
    let residual: f64 = last[3].parse().unwrap();
    assert!((lambda - 0.7).abs() < 1e-12);
    assert!(residual <= 1e-9);
}

#[test]
fn branch_from_trivial_root_fails_with_exit_3() {
    let out = middelay(&[
        "branch",
        "--lambda-start",
        "0.5",
        "--lambda-end",
        "0.7",
        "--start-re",
        "0.0",
        "--start-im",
        "0.0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_str(stderr_of(&out).trim()).unwrap();
    assert_eq!(err["code"], "numerical_failure");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let args = ["design", "--platelet", "--n", "2.2", "--theta", "0.04", "--gamma", "3",
        "--g0", "4", "--tau1", "9", "--lifespan", "10", "--y-star", "0.01"];
    let a = middelay(&args);
    let b = middelay(&args);
    assert!(a.status.success(), "stderr: {}", stderr_of(&a));
    assert_eq!(stdout_of(&a), stdout_of(&b));

    let spectrum_args = ["spectrum", "--input",
        r#"{"terms":[{"coeffs":[0.0,1.0],"delay":0.0},{"coeffs":[1.0],"delay":0.36787944117144233}]}"#,
        "--re-min", "-6", "--re-max", "1", "--im-min", "-20", "--im-max", "20"];
    let a = middelay(&spectrum_args);
    let b = middelay(&spectrum_args);
    assert_eq!(stdout_of(&a), stdout_of(&b));
}

#[test]
fn seed_flag_is_accepted_and_ignored() {
    let with = middelay(&["--seed", "7", "design", "--two-delay", "--tau1", "1", "--tau2", "2"]);
    let without = middelay(&["design", "--two-delay", "--tau1", "1", "--tau2", "2"]);
    assert!(with.status.success(), "stderr: {}", stderr_of(&with));
    assert_eq!(stdout_of(&with), stdout_of(&without));
}
