use std::path::{Path, PathBuf};
use std::process::Command;

use ideation_core::orchestrator::{LogEntry, ScoreReport};

fn engine() -> Command {
    Command::new(env!("CARGO_BIN_EXE_engine"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_generation_writes_trace_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let csv = dir.path().join("trace.csv");
    run(engine()
        .args(["simulate", "--seed", "4"])
        .arg(fixture("generation.json"))
        .arg("--out")
        .arg(&trace)
        .arg("--csv")
        .arg(&csv));
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), 50);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["trial"], 1);
    assert_eq!(first["arm"], "similar_any");
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().count(), 51);

    // same seed, same trace
    let again = run(engine()
        .args(["simulate", "--seed", "4"])
        .arg(fixture("generation.json")));
    assert_eq!(again, lines);
}

#[test]
fn simulated_log_replays_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("event.jsonl");
    run(engine()
        .args(["simulate", "--seed", "1"])
        .arg(fixture("end_to_end.json"))
        .arg("--out")
        .arg(&log));
    let entries: Vec<LogEntry> = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(entries.len() > 20);

    let snapshot = run(engine().arg("replay").arg(&log));
    let state: serde_json::Value = serde_json::from_str(snapshot.trim()).unwrap();
    assert_eq!(state["core"]["phase"], "Post");

    let report: ScoreReport = serde_json::from_str(&run(engine().arg("report").arg(&log))).unwrap();
    assert_eq!(report.selected.len(), 3);
}

#[test]
fn replay_rejects_a_tampered_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("event.jsonl");
    run(engine()
        .args(["simulate", "--seed", "2"])
        .arg(fixture("end_to_end.json"))
        .arg("--out")
        .arg(&log));
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(5);
    std::fs::write(&log, lines.join("\n")).unwrap();
    let out = engine().arg("replay").arg(&log).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("log entry"));
}

#[test]
fn csv_is_refused_for_event_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = engine()
        .arg("simulate")
        .arg(fixture("end_to_end.json"))
        .arg("--out")
        .arg(dir.path().join("log.jsonl"))
        .arg("--csv")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}
