//! Drives the `conav` binary end to end.

use std::process::Command;

fn conav() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conav"))
}

#[test]
fn run_writes_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basic.log");
    let status = conav()
        .args(["run", "--scenario", "basic", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let log = std::fs::read_to_string(&out).unwrap();
    assert!(log.starts_with("# conav-log v1"));
    assert!(log.lines().any(|l| l.starts_with("S 1 ")));
    assert!(log.trim_end().lines().last().unwrap().starts_with("# outcome="));
}

#[test]
fn run_accepts_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("mine.scn");
    std::fs::write(&scn, conav_core::world::maps::BASIC).unwrap();
    let out = conav()
        .args(["run", "--baseline", "--scenario"])
        .arg(&scn)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# conav-log v1"));
}

#[test]
fn run_rejects_bad_priority() {
    let out = conav()
        .args(["run", "--scenario", "basic", "--f-priority", "1.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn batch_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let status = conav()
        .args(["batch", "--scenarios", "basic", "--seeds", "0,1", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let trials = std::fs::read_to_string(dir.path().join("trials.tsv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 4);
    assert!(trials.lines().next().unwrap().starts_with("scenario\tmethod"));
    assert!(dir.path().join("summary.tsv").exists());
}
