use std::path::PathBuf;
use std::process::{Command, Output};

fn crossing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn worked_scenario_checks_clean() {
    let out = crossing(&["check", "--scenario", &scenario("worked.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("safety"));
}

#[test]
fn narrow_scenario_checks_clean() {
    let out = crossing(&[
        "check",
        "--scenario",
        &scenario("narrow.json"),
        "--properties",
        "safety,liveness",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn simulated_trace_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("worked.trace.json");
    let trace = trace.to_str().unwrap();
    let sim = crossing(&[
        "simulate",
        "--scenario",
        &scenario("worked.json"),
        "--out",
        trace,
    ]);
    assert_eq!(sim.status.code(), Some(0));
    let verify = crossing(&["verify-trace", "--trace", trace]);
    assert_eq!(verify.status.code(), Some(0), "{}", stdout(&verify));
}

#[test]
fn tampered_trace_is_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let sim = crossing(&["simulate", "--scenario", &scenario("worked.json")]);
    let text = stdout(&sim);
    // Open the gate at 15, while the train is in the crossing.
    let moments: serde_json::Value = serde_json::from_str(&text).unwrap();
    let idx = moments["moments"]
        .as_array()
        .unwrap()
        .iter()
        .position(|m| m["time"] == "15")
        .unwrap();
    let mut doc = moments.clone();
    doc["moments"][idx]["plus"]["GateStatus"] = "opened".into();
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = crossing(&["verify-trace", "--trace", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
}

#[test]
fn fuzz_is_deterministic() {
    let args = ["fuzz", "--seed", "9", "--count", "20", "--tracks", "2"];
    let a = crossing(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&crossing(&args)));
    assert!(stdout(&a).starts_with("20 cases passed"));
}

#[test]
fn tightness_witness_behaves_as_claimed() {
    for (part, c) in [("1", "1"), ("2", "3/2")] {
        let out = crossing(&["tightness", "--part", part, "--c", c]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
}

#[test]
fn tightness_rejects_a_constant_at_the_bound() {
    let out = crossing(&["tightness", "--part", "1", "--c", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn malformed_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"params": {"dclose": "1"}}"#).unwrap();
    let out = crossing(&["check", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");
}
