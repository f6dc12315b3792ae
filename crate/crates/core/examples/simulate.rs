//! Deterministic simulation: the same configuration always yields the same
//! trace, which round-trips through JSON lines.
//!
//! ```bash
//! cargo run --example simulate
//! ```

use scd_broadcast::sim::{Command, CrashSpec, DelayModel, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::{validate, Trace};
use scd_broadcast::types::ProcessId;

fn main() {
    let config = SimConfig {
        n: 4,
        t: 1,
        seed: 42,
        delay: DelayModel::Unbounded { mean: 10 },
        stack: StackKind::Scd,
        crashes: vec![CrashSpec { proc: ProcessId::new(4), time: 3, cut: Some(2) }],
        ..SimConfig::default()
    };
    let mut workload = Workload::default();
    for (k, p) in ProcessId::all(4).enumerate() {
        workload.push(k as u64, p, Command::Broadcast { data: format!("hello from {p}") });
    }

    let a = stack::run(&config, &workload).expect("valid configuration");
    let b = stack::run(&config, &workload).expect("valid configuration");
    let text = a.trace.to_jsonl();
    assert_eq!(text, b.trace.to_jsonl());
    let reloaded = Trace::read_jsonl(text.as_bytes()).expect("own output parses");
    assert_eq!(reloaded, a.trace);
    validate(&a.trace).expect("simulator traces are well formed");

    println!("{} events, {} bytes of JSONL, identical across runs", a.trace.events.len(), text.len());
    println!("ended at t={} with {} pending operations", a.report.end_time, a.report.pending_ops.len());
    for line in text.lines().skip(1).take(5) {
        println!("  {line}");
    }
}
