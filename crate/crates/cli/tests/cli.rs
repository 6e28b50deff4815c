use std::path::Path;
use std::process::{Command, Output};

fn gjra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gjra")).args(args).output().expect("running gjra")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        assert!(gjra(&["generate", "--n", "8", "--m", "2", "--seed", "11", "--out", &path(dir.path(), name)]).status.success());
    }
    assert!(gjra(&["generate", "--n", "8", "--m", "2", "--seed", "12", "--out", &path(dir.path(), "c.json")]).status.success());
    let read = |n| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));
}

#[test]
fn inverted_task_range_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gjra(&["generate", "--bits", "10", "1", "--out", &path(dir.path(), "s.json")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_scenario_exits_with_one() {
    assert_eq!(gjra(&["solve", "/nonexistent/scenario.json"]).status.code(), Some(1));
    assert_eq!(gjra(&["sweep", "/nonexistent/spec.json", "--out", "/tmp/x.csv"]).status.code(), Some(1));
}

#[test]
fn exhaustive_search_refuses_large_instances() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.json");
    assert!(gjra(&["generate", "--n", "50", "--m", "4", "--out", &s]).status.success());
    assert_eq!(gjra(&["solve", &s, "--scheme", "EA"]).status.code(), Some(4));
    assert_eq!(gjra(&["compare", &s]).status.code(), Some(4));
}

#[test]
fn single_device_solve_writes_report_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.json");
    let report = path(dir.path(), "r.json");
    let channel = path(dir.path(), "c.csv");
    assert!(gjra(&["generate", "--n", "1", "--m", "1", "--out", &s]).status.success());
    let o = gjra(&["solve", &s, "--out", &report, "--dump-channel", &channel, "--emit", "breakdown"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("GJRA: total latency"));
    assert!(text.contains("device,position,offload"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["assignment"], serde_json::json!([0]));
    assert_eq!(rep["wall_time_s"], serde_json::json!(0.0));
    assert_eq!(std::fs::read_to_string(&channel).unwrap().lines().count(), 2);
}

#[test]
fn single_cell_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "spec.json");
    let csv = path(dir.path(), "out.csv");
    std::fs::write(
        &spec,
        r#"{"parameter": "n_devices", "values": [5], "seeds": [1], "schemes": ["NP"], "base": {"m_positions": 2}}"#,
    )
    .unwrap();
    assert!(gjra(&["sweep", &spec, "--out", &csv]).status.success());
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(rows.lines().nth(1).unwrap().starts_with("n_devices,5,1,NP,"));
    assert!(dir.path().join("out.summary.csv").exists());
}

#[test]
fn sweep_with_unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "spec.json");
    std::fs::write(&spec, r#"{"parameter": "n_devices", "values": [5], "seeds": [1], "schemes": ["NP"], "extra": 1}"#).unwrap();
    assert_eq!(gjra(&["sweep", &spec, "--out", &path(dir.path(), "o.csv")]).status.code(), Some(2));
}

#[test]
fn compare_lists_every_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.json");
    assert!(gjra(&["generate", "--n", "4", "--m", "2", "--seed", "2", "--out", &s]).status.success());
    let o = gjra(&["compare", &s]);
    assert!(o.status.success());
    let text = stdout(&o);
    for label in ["GJRA", "RS", "NP", "EA"] {
        assert!(text.lines().any(|l| l.starts_with(label)), "{label} missing from {text}");
    }
}

#[test]
fn verify_passes_and_audits_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.json");
    assert!(gjra(&["generate", "--n", "20", "--m", "3", "--out", &s]).status.success());
    let o = gjra(&["verify", "--count", "20", "--scenario", &s]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains(" 0 failed, 0 violations"));
    let strict = gjra(&["verify", "--count", "20", "--tol", "1e-30"]);
    assert_eq!(strict.status.code(), Some(5));
}
