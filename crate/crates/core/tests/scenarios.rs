use std::path::PathBuf;

use scd_broadcast::checkers::Status;
use scd_broadcast::runner::run_checked;
use scd_broadcast::scenario::{Scenario, ScenarioError};
use scd_broadcast::sim::StackKind;
use scd_broadcast::verify::CheckOptions;

fn bundled() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut paths: Vec<_> = std::fs::read_dir(dir).expect("scenarios dir").map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

fn options(s: &Scenario) -> CheckOptions {
    CheckOptions { checks: s.checks.clone(), expect: s.expect, ..CheckOptions::default() }
}

#[test]
fn every_bundled_scenario_passes_its_checks() {
    let paths = bundled();
    assert!(paths.len() >= 8);
    for path in paths {
        let s = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let c = run_checked(&s.config(), &s.workload().unwrap(), &options(&s)).unwrap();
        assert!(!c.failed(), "{}: {:?}", path.display(), c.verdicts);
        if s.expect.is_some() {
            assert!(c.verdicts.iter().any(|v| v.status == Status::ExpectedStarvation), "{}", path.display());
        }
    }
}

#[test]
fn shared_memory_runs_end_settled_before_the_horizon() {
    for path in bundled() {
        let s = Scenario::load(&path).unwrap();
        let cfg = s.config();
        if !matches!(cfg.stack, StackKind::ShmScd | StackKind::ShmScdRoundtrip) {
            continue;
        }
        let c = run_checked(&cfg, &s.workload().unwrap(), &options(&s)).unwrap();
        assert!(!c.report.hit_horizon, "{}", path.display());
        assert!(c.report.pending_ops.is_empty(), "{}", path.display());
    }
}

#[test]
fn parse_errors_point_at_the_line() {
    let err = Scenario::parse("n = 3\nt = 1\nstack = \"scd\"\ndelay = { bounded = 10 }\nbogus = 4\n").unwrap_err();
    assert!(matches!(err, ScenarioError::Parse(_)));
    assert!(err.to_string().contains("line 5"), "{err}");
}

#[test]
fn workload_errors_name_the_entry() {
    let text = r#"
n = 2
t = 0
stack = "snapshot"
registers = 1
delay = { bounded = 10 }

[[workload]]
time = 0
proc = 1
op = "write"
args = ["zero", 1]
"#;
    let err = Scenario::parse(text).unwrap_err();
    assert!(err.to_string().starts_with("workload[0].args"), "{err}");
}
