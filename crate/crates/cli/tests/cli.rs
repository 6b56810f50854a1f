//! Exit codes and exports of the `fermtwin` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIOS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios");

fn fermtwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermtwin"))
        .args(args)
        .env_remove("FERMTWIN_LOG")
        .output()
        .expect("spawn fermtwin")
}

fn scenario(name: &str) -> String {
    format!("{SCENARIOS}/{name}.json")
}

fn write(dir: &Path, name: &str, json: &serde_json::Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(json).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn listing(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn passing_scenario_exits_zero() {
    let out = fermtwin(&["run", &scenario("pressure_spike"), "--speed", "max"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("result PASS"));
}

#[test]
fn violated_invariant_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("pressure_spike")).unwrap();
    let mut s: serde_json::Value = serde_json::from_str(&text).unwrap();
    s["batch"]["safety_response_deadline_ms"] = 1.into();
    let path = write(dir.path(), "strict.json", &s);
    let out = fermtwin(&["run", &path]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("result FAIL"), "{stdout}");
    assert!(stdout.contains("SafetyDeadlineMissed"), "{stdout}");
}

#[test]
fn zero_duration_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "empty.json", &serde_json::json!({"name": "empty", "duration_ms": 0}));
    assert_eq!(fermtwin(&["run", &path]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(fermtwin(&["run", &missing.to_string_lossy()]).status.code(), Some(2));

    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(fermtwin(&["run", &garbled.to_string_lossy()]).status.code(), Some(2));

    let late = write(
        dir.path(),
        "late.json",
        &serde_json::json!({
            "name": "late",
            "duration_ms": 1000,
            "events": [{"at_ms": 1001, "action": "confirm_pending", "origin": "remote"}]
        }),
    );
    let out = fermtwin(&["run", &late]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    assert_eq!(fermtwin(&["serve", "--config", &missing.to_string_lossy()]).status.code(), Some(2));
}

#[test]
fn export_is_byte_identical_across_runs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out_dir = dir.path().to_string_lossy();
        let out = fermtwin(&["run", &scenario("sensor_failure_ph"), "--seed", "9", "--out", &out_dir]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).contains("exported"));
    }
    let (a, b) = (listing(dirs[0].path()), listing(dirs[1].path()));
    assert!(a.len() >= 5, "{:?}", a.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(a, b);
}

#[test]
fn seed_changes_the_export() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, seed) in dirs.iter().zip(["1", "2"]) {
        let out_dir = dir.path().to_string_lossy();
        let out = fermtwin(&["run", &scenario("nominal_batch"), "--seed", seed, "--out", &out_dir]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_ne!(listing(dirs[0].path()), listing(dirs[1].path()));
}

#[test]
fn endurance_exits_zero() {
    let out = fermtwin(&["endurance", "--cycles", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
