//! Atomic counter over set-constrained delivery, under a crash.
//!
//! ```bash
//! cargo run --example atomic_counter
//! ```

use scd_broadcast::checkers::{check_linearizable, CounterSpec, History};
use scd_broadcast::sim::{Command, CrashSpec, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::Layer;
use scd_broadcast::types::ProcessId;

fn main() {
    let p = ProcessId::new;
    let config = SimConfig {
        n: 5,
        t: 2,
        seed: 17,
        stack: StackKind::Counter,
        crashes: vec![CrashSpec { proc: p(5), time: 12, cut: Some(2) }],
        ..SimConfig::default()
    };
    let mut w = Workload::default();
    w.push(0, p(1), Command::Inc);
    w.push(0, p(2), Command::Inc);
    w.push(3, p(3), Command::Dec);
    w.push(10, p(5), Command::Inc);
    w.push(10, p(4), Command::Read);
    w.push(30, p(1), Command::Read);
    w.push(60, p(2), Command::Read);
    w.push(61, p(3), Command::Read);
    let out = stack::run(&config, &w).expect("valid configuration");
    let h = History::from_trace(&out.trace, Layer::Object);
    for op in &h.ops {
        println!("{} {:?} -> {:?}", op.proc, op.op, op.result);
    }
    println!("{}", check_linearizable(&h, &CounterSpec, 8));
}
