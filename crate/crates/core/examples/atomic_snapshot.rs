//! MWMR atomic snapshot on top of set-constrained delivery, checked for
//! linearizability, with its broadcast cost per operation.
//!
//! ```bash
//! cargo run --example atomic_snapshot
//! ```

use scd_broadcast::checkers::{check_linearizable, History, SnapshotSpec};
use scd_broadcast::metrics::report_metrics;
use scd_broadcast::sim::{Command, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::Layer;
use scd_broadcast::types::ProcessId;

fn main() {
    let p = ProcessId::new;
    let config = SimConfig { n: 3, t: 1, seed: 21, stack: StackKind::Snapshot, registers: Some(2), ..SimConfig::default() };
    let mut w = Workload::default();
    w.push(0, p(1), Command::Write { reg: 0, value: 7 });
    w.push(0, p(2), Command::Write { reg: 1, value: 8 });
    w.push(5, p(3), Command::Snapshot);
    w.push(15, p(3), Command::Write { reg: 0, value: 9 });
    w.push(20, p(1), Command::Snapshot);
    w.push(40, p(2), Command::Snapshot);
    let out = stack::run(&config, &w).expect("valid configuration");

    let history = History::from_trace(&out.trace, Layer::Object);
    for op in &history.ops {
        println!("{} {:?} -> {:?}", op.proc, op.op, op.result);
    }
    println!("{}", check_linearizable(&history, &SnapshotSpec::ints(2), 8));
    for c in report_metrics(&out.trace).operations {
        println!("{} {} used {} broadcasts", c.proc, c.op, c.scd_broadcasts);
    }
}
