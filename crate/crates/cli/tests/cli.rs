use std::path::Path;
use std::process::{Command, Output};

fn nhmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhmech"))
        .args(args)
        .env_remove("NHMECH_FD_STEP")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn strip_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.contains("generated_at"))
        .collect::<Vec<_>>()
        .join("\n")
}

const SLEIGH: &str = r#"{
  "system": { "name": "chaplygin_sleigh" },
  "integrator": { "horizon": 10.0, "sample_every": 100 },
  "checks": ["energy"],
  "output": { "trajectory": "sleigh.csv", "report": "report.json" }
}"#;

#[test]
fn sleigh_run_writes_csv_and_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sleigh.json", SLEIGH);
    let out = nhmech(&["run", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("sleigh.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,omega,v1,v2,E"));
    assert_eq!(lines.count(), 101);
    assert!(!csv.contains('\r'));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let drift = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "energy.drift")
        .unwrap();
    assert!(drift["measured"].as_f64().unwrap() <= 1e-6);
    assert_eq!(drift["pass"], true);
    assert!(report["generated_at"].as_str().unwrap().ends_with('Z'));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sleigh.json", SLEIGH);
    assert_eq!(nhmech(&["run", &cfg]).status.code(), Some(0));
    let csv1 = std::fs::read(dir.path().join("sleigh.csv")).unwrap();
    let rep1 = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(nhmech(&["run", &cfg]).status.code(), Some(0));
    assert_eq!(csv1, std::fs::read(dir.path().join("sleigh.csv")).unwrap());
    let rep2 = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(strip_timestamp(&rep1), strip_timestamp(&rep2));
}

#[test]
fn unknown_system_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"system": {"name": "pendulum"}, "checks": ["energy"]}"#,
    );
    let out = nhmech(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("system.name"), "{err}");
}

#[test]
fn malformed_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body, field) in [
        (
            "typo.json",
            r#"{"system": {"name": "suslov"}, "chekcs": []}"#,
            "chekcs",
        ),
        (
            "param.json",
            r#"{"system": {"name": "suslov", "params": {"mass": 1}}, "checks": ["energy"]}"#,
            "mass",
        ),
        (
            "check.json",
            r#"{"system": {"name": "suslov"}, "checks": ["energ"]}"#,
            "checks",
        ),
        (
            "state.json",
            r#"{"system": {"name": "suslov"}, "initial_state": {"x": [], "y": [0, 0, 1]}, "checks": ["energy"]}"#,
            "initial_state",
        ),
        (
            "step.json",
            r#"{"system": {"name": "suslov"}, "integrator": {"step": -1}, "checks": ["energy"]}"#,
            "integrator",
        ),
        (
            "na.json",
            r#"{"system": {"name": "suslov"}, "checks": ["bracket_table"]}"#,
            "checks",
        ),
    ] {
        let cfg = write_config(dir.path(), name, body);
        let out = nhmech(&["run", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{name}");
    }
    assert_eq!(
        nhmech(&["run", dir.path().join("missing.json").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn spinning_table_breaks_energy_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ball.json",
        r#"{
  "system": { "name": "rolling_ball", "params": { "Omega": 1.0 } },
  "integrator": { "horizon": 2.0, "sample_every": 10 },
  "checks": ["energy"],
  "output": { "report": "ball.json.out" }
}"#,
    );
    let out = nhmech(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL energy.drift"), "{stdout}");
    assert!(stdout.contains("predicted by the drift law"), "{stdout}");
    assert!(stdout.contains("PASS energy.rate_law"), "{stdout}");
}

#[test]
fn list_systems_in_both_formats() {
    let out = nhmech(&["list-systems"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "suslov",
        "chaplygin_sleigh",
        "veselova",
        "mobile_robot",
        "rolling_ball",
    ] {
        assert!(text.contains(name));
    }
    let out = nhmech(&["list-systems", "--json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = parsed.as_array().unwrap();
    assert_eq!(arr.len(), 5);
    assert_eq!(arr[1]["parameters"][0]["name"], "m");
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = nhmech(&["list-systems", "--colour"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn verify_selected_checks() {
    let out = nhmech(&[
        "verify",
        "chaplygin_sleigh",
        "--check",
        "oracle_match",
        "--check",
        "route_equivalence",
        "--seed",
        "7",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS oracle_match.pointwise"));
    assert!(text.contains("PASS route_equivalence"));
    assert_eq!(nhmech(&["verify", "pendulum"]).status.code(), Some(2));
    assert_eq!(
        nhmech(&["verify", "suslov", "--check", "chaplygin"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fd_step_override_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_nhmech"))
        .args(["verify", "suslov", "--check", "structure_equations"])
        .env("NHMECH_FD_STEP", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NHMECH_FD_STEP"));
    let out = Command::new(env!("CARGO_BIN_EXE_nhmech"))
        .args(["verify", "suslov", "--check", "structure_equations"])
        .env("NHMECH_FD_STEP", "1e-5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
