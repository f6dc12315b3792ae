//! Sequentially consistent snapshot and counter: cheaper operations, a
//! history that is sequentially consistent but not linearizable.
//!
//! ```bash
//! cargo run --example sequential_consistency
//! ```

use scd_broadcast::checkers::{
    check_linearizable, check_sequentially_consistent, CounterSpec, History, SnapshotSpec,
};
use scd_broadcast::metrics::report_metrics;
use scd_broadcast::sim::{Command, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::Layer;
use scd_broadcast::types::ProcessId;

fn main() {
    let p = ProcessId::new;

    let config = SimConfig { n: 3, t: 1, seed: 6, stack: StackKind::SnapshotSc, registers: Some(1), ..SimConfig::default() };
    let mut w = Workload::default();
    w.push(0, p(1), Command::Write { reg: 0, value: 1 });
    for k in 0..7 {
        w.push(8 + 4 * k, p(2), Command::Snapshot);
    }
    let out = stack::run(&config, &w).expect("valid configuration");
    let h = History::from_trace(&out.trace, Layer::Object);
    let spec = SnapshotSpec::ints(1);
    println!("snapshot, seed 6:");
    println!("  {}", check_linearizable(&h, &spec, 8));
    println!("  {}", check_sequentially_consistent(&h, &spec, 8));

    let config = SimConfig { n: 3, t: 1, seed: 2, stack: StackKind::CounterSc, ..SimConfig::default() };
    let mut w = Workload::default();
    w.push(0, p(1), Command::Inc);
    w.push(0, p(1), Command::Inc);
    w.push(0, p(2), Command::Dec);
    w.push(1, p(3), Command::Read);
    w.push(40, p(3), Command::Read);
    let out = stack::run(&config, &w).expect("valid configuration");
    println!("counter:");
    for c in report_metrics(&out.trace).operations {
        println!("  {} {} took {:?}", c.proc, c.op, c.latency);
    }
    let h = History::from_trace(&out.trace, Layer::Object);
    println!("  {}", check_sequentially_consistent(&h, &CounterSpec, 8));
}
