//! End-to-end contract tests for the `gridcert` binary: exit codes, CSV
//! shapes, report determinism, and grid overrides.

use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn gridcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn certify_admits_the_tuned_network_and_exits_zero() {
    let path = config("two_bus_designed.toml");
    let out = gridcert(&["certify", path.to_str().unwrap()]);
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(0), "stdout: {text}");
    assert!(text.contains("bus north: gamma_min = 0.162434"), "{text}");
    assert!(text.contains("bus south: gamma_min = 0.162434"), "{text}");
    assert!(text.contains("verdict: certified"), "{text}");
}

#[test]
fn certify_reports_unstable_buses_and_exits_two() {
    let path = config("two_bus_aggressive.toml");
    let out = gridcert(&["certify", path.to_str().unwrap()]);
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(2), "stdout: {text}");
    assert!(text.contains("bus north: assumption violated"), "{text}");
    assert!(text.contains("internally unstable"), "{text}");
    assert!(text.contains("verdict: not certified"), "{text}");
}

#[test]
fn global_check_counts_the_unstable_pair_per_bus() {
    let path = config("two_bus_aggressive.toml");
    let out = gridcert(&["global-check", path.to_str().unwrap()]);
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(2), "stdout: {text}");
    assert!(
        text.contains("unstable (4 closed-loop right-half-plane poles)"),
        "{text}"
    );
}

#[test]
fn simulate_writes_the_trajectory_with_per_bus_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("traj.csv");
    let path = config("two_bus_droop.toml");
    let out = gridcert(&[
        "simulate",
        path.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stdout: {}", stdout_of(&out));
    assert!(stdout_of(&out).contains("verdict: decaying"));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,theta_north,omega_north,x_north,theta_south,omega_south,x_south"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    // dt = 1e-3 over 20 s: header + 20001 samples.
    assert_eq!(csv.lines().count(), 20002);
}

#[test]
fn simulate_without_a_sim_section_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nosim.toml");
    let full = std::fs::read_to_string(config("two_bus_droop.toml")).unwrap();
    let stripped = full.split("[sim]").next().unwrap();
    std::fs::write(&path, stripped).unwrap();
    let out = gridcert(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no [sim] section"));
}

#[test]
fn freqresp_emits_the_five_column_sweep() {
    let path = config("two_bus_designed.toml");
    let out = gridcert(&[
        "freqresp",
        path.to_str().unwrap(),
        "--bus",
        "north",
        "--points",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "omega,re,im,mag,phase");
    assert_eq!(text.lines().count(), 17);
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), 5);
        let (re, im, mag) = (fields[1], fields[2], fields[3]);
        assert!((mag - (re * re + im * im).sqrt()).abs() <= 1e-12 * (1.0 + mag));
    }
}

#[test]
fn grid_points_env_var_sets_the_default_density() {
    let path = config("two_bus_designed.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_gridcert"))
        .args(["freqresp", path.to_str().unwrap(), "--bus", "north"])
        .env("GRIDCERT_GRID_POINTS", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out).lines().count(), 9);

    // An explicit flag wins over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_gridcert"))
        .args([
            "freqresp",
            path.to_str().unwrap(),
            "--bus",
            "north",
            "--points",
            "4",
        ])
        .env("GRIDCERT_GRID_POINTS", "8")
        .output()
        .unwrap();
    assert_eq!(stdout_of(&out).lines().count(), 5);

    // A malformed value is invalid input, not a silent default.
    let out = Command::new(env!("CARGO_BIN_EXE_gridcert"))
        .args(["freqresp", path.to_str().unwrap(), "--bus", "north"])
        .env("GRIDCERT_GRID_POINTS", "###")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn min_gamma_matches_certify_and_unknown_ids_are_rejected() {
    let path = config("two_bus_designed.toml");
    let out = gridcert(&["min-gamma", path.to_str().unwrap(), "--bus", "south"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("gamma_min = 0.162434"));

    let out = gridcert(&["min-gamma", path.to_str().unwrap(), "--bus", "nowhere"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn first_order_exit_code_follows_the_budget_verdict() {
    let base = ["first-order", "--a", "1.37", "--b", "1", "--eps", "0.08", "--omega0", "30"];
    let pass = gridcert(&[&base[..], &["--gamma", "0.19"][..]].concat());
    assert_eq!(pass.status.code(), Some(0));
    assert!(stdout_of(&pass).contains("gamma = 0.19: pass"));

    let fail = gridcert(&[&base[..], &["--gamma", "0.18"][..]].concat());
    assert_eq!(fail.status.code(), Some(2));
    assert!(stdout_of(&fail).contains("gamma = 0.18: fail"));

    let invalid = gridcert(&["first-order", "--a", "-1", "--b", "1", "--eps", "0", "--omega0", "30"]);
    assert_eq!(invalid.status.code(), Some(3));
}

#[test]
fn reports_are_deterministic_json_with_tool_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let path = config("two_bus_designed.toml");
    for out in [&a, &b] {
        let run = gridcert(&[
            "certify",
            path.to_str().unwrap(),
            "--report",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run.status.code(), Some(0));
    }
    let text_a = std::fs::read_to_string(&a).unwrap();
    let text_b = std::fs::read_to_string(&b).unwrap();
    assert_eq!(text_a, text_b, "reports must be byte-identical across runs");

    let doc: serde_json::Value = serde_json::from_str(&text_a).unwrap();
    assert_eq!(doc["tool"]["name"], "gridcert");
    assert_eq!(doc["command"], "certify");
    assert_eq!(doc["certified"], true);
    assert_eq!(doc["exit_code"], 0);
    assert_eq!(doc["grid"]["points"], 2000);
    assert!(doc["tolerances"]["gamma_tol"].is_number());
    assert_eq!(doc["buses"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_flags_are_invalid_input_not_a_negative_verdict() {
    let out = gridcert(&["certify", "--bogus"]);
    assert_eq!(out.status.code(), Some(3));

    let missing = gridcert(&["certify", "/nonexistent/net.toml"]);
    assert_eq!(missing.status.code(), Some(3));
}
