//! Selecting and running the checkers that apply to a finished run.

use serde::{Deserialize, Serialize};

use crate::checkers::fifo::check_fifo;
use crate::checkers::shm::check_setseq_before_delivery;
use crate::checkers::{
    check_lattice_task, check_linearizable, check_scd_properties, check_sequentially_consistent,
    lattice_task_from_trace, CounterSpec, History, SnapshotSpec, Status, Verdict, Witness,
};
use crate::scenario::{CheckKind, Expectation};
use crate::sim::StackKind;
use crate::trace::{validate, Layer, Trace};
use crate::types::ProcessId;

const LIVENESS: [&str; 3] = ["termination_1", "termination_2", "lattice_termination"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub checks: Vec<CheckKind>,
    pub max_ops: usize,
    pub expect: Option<Expectation>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            checks: vec![CheckKind::All],
            max_ops: crate::checkers::consistency::DEFAULT_MAX_OPS,
            expect: None,
        }
    }
}

fn prefixed(prefix: &str, vs: Vec<Verdict>) -> Vec<Verdict> {
    vs.into_iter().map(|v| Verdict { property: format!("{prefix}{}", v.property), ..v }).collect()
}

fn consistency(trace: &Trace, sequential: bool, max_ops: usize) -> Verdict {
    let name = if sequential { "sequential_consistency" } else { "linearizability" };
    let h = History::from_trace(trace, Layer::Object);
    match trace.config.stack {
        StackKind::Snapshot | StackKind::SnapshotSc => {
            let spec = SnapshotSpec::ints(trace.config.registers());
            if sequential {
                check_sequentially_consistent(&h, &spec, max_ops)
            } else {
                check_linearizable(&h, &spec, max_ops)
            }
        }
        StackKind::Counter | StackKind::CounterSc => {
            if sequential {
                check_sequentially_consistent(&h, &CounterSpec, max_ops)
            } else {
                check_linearizable(&h, &CounterSpec, max_ops)
            }
        }
        other => Verdict::unchecked(name, format!("no sequential specification for stack {other:?}")),
    }
}

fn lattice(trace: &Trace) -> Vec<Verdict> {
    if trace.config.stack != StackKind::Lattice {
        return vec![Verdict::unchecked("lattice", "not a lattice agreement run")];
    }
    let (inputs, outputs) = lattice_task_from_trace(trace);
    let non_faulty = ProcessId::all(trace.config.n).filter(|p| !trace.faulty().contains(p)).collect();
    check_lattice_task(&inputs, &outputs, &non_faulty)
}

fn broadcast_suite(trace: &Trace) -> Vec<Verdict> {
    let stack = trace.config.stack;
    match stack {
        StackKind::Fifo => check_fifo(trace),
        StackKind::ShmScd => {
            let mut v = check_scd_properties(trace, Layer::ShmScd);
            v.push(check_setseq_before_delivery(trace));
            v
        }
        StackKind::ShmScdRoundtrip => {
            let mut v = check_scd_properties(trace, Layer::ShmScd);
            v.push(check_setseq_before_delivery(trace));
            v.extend(prefixed("inner.", check_scd_properties(trace, Layer::Scd)));
            v
        }
        _ => check_scd_properties(trace, Layer::Scd),
    }
}

/// Verdicts for `trace`, always led by a structural validity verdict.
pub fn check_trace(trace: &Trace, opts: &CheckOptions) -> Vec<Verdict> {
    let mut out = vec![Verdict::from_result(
        "trace_structure",
        validate(trace).map_err(|e| Witness::Text { text: format!("event {}: {}", e.index, e.reason) }),
    )];
    let stack = trace.config.stack;
    for kind in &opts.checks {
        match kind {
            CheckKind::All => {
                out.extend(broadcast_suite(trace));
                match stack {
                    StackKind::Snapshot | StackKind::Counter => out.push(consistency(trace, false, opts.max_ops)),
                    StackKind::SnapshotSc | StackKind::CounterSc => out.push(consistency(trace, true, opts.max_ops)),
                    StackKind::Lattice => out.extend(lattice(trace)),
                    _ => {}
                }
            }
            CheckKind::Scd => out.extend(broadcast_suite(trace)),
            CheckKind::Lin => out.push(consistency(trace, false, opts.max_ops)),
            CheckKind::Sc => out.push(consistency(trace, true, opts.max_ops)),
            CheckKind::Lattice => out.extend(lattice(trace)),
        }
    }
    if opts.expect == Some(Expectation::Starvation) {
        apply_starvation(&mut out);
    }
    out
}

/// Liveness failures become the expected outcome; their absence is a failure.
fn apply_starvation(verdicts: &mut Vec<Verdict>) {
    let mut starved = false;
    for v in verdicts.iter_mut() {
        if LIVENESS.contains(&v.property.as_str()) && v.failed() {
            v.status = Status::ExpectedStarvation;
            starved = true;
        }
    }
    if !starved {
        verdicts.push(Verdict::fail(
            "expected_starvation",
            Witness::Text { text: "every broadcast by a live process completed".into() },
        ));
    }
}

/// Exit status is 1 iff some verdict failed.
pub fn exit_code(verdicts: &[Verdict]) -> i32 {
    i32::from(verdicts.iter().any(Verdict::failed))
}
