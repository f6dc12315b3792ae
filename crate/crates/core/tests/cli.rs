use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scdsim")).args(args).output().expect("scdsim runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(file).display()))
}

#[test]
fn repeated_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = scdsim(&["--scenario", &scenario("eight-broadcasts.toml"), "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for file in ["trace.jsonl", "metrics.json", "verdicts.jsonl"] {
        assert_eq!(read(&a, file), read(&b, file), "{file}");
    }
}

#[test]
fn stored_traces_check_the_same_as_fresh_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let again = tmp.path().join("again");
    scdsim(&["--scenario", &scenario("snapshot.toml"), "--out", run.to_str().unwrap()]);
    let trace = run.join("trace.jsonl");
    let out = scdsim(&["--trace", trace.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(&run, "verdicts.jsonl"), read(&again, "verdicts.jsonl"));
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scdsim(&["--scenario", &scenario("counter-sc.toml"), "--check", "lin", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL linearizability"));
}

#[test]
fn sweep_counts_expected_starvation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scdsim(&[
        "--scenario",
        &scenario("resilience-starvation.toml"),
        "--seeds",
        "0..20",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("20 seeds (0..20): 0 failing, 20 EXPECTED-STARVATION"), "{stdout}");
    let summary = std::fs::read_to_string(tmp.path().join("summary.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 20);
}

#[test]
fn malformed_scenario_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "n = \"three\"\n").unwrap();
    let out = scdsim(&["--scenario", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
