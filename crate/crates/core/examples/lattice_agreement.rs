//! Lattice agreement over integer-set union.
//!
//! ```bash
//! cargo run --example lattice_agreement
//! ```

use scd_broadcast::checkers::{check_lattice_task, lattice_task_from_trace};
use scd_broadcast::sim::{Command, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::types::ProcessId;

fn main() {
    let n = 4;
    let config = SimConfig { n, t: 1, seed: 8, stack: StackKind::Lattice, ..SimConfig::default() };
    let mut w = Workload::default();
    for p in ProcessId::all(n) {
        w.push(p.get() as u64, p, Command::Propose { value: [p.get() as i64 * 10].into() });
    }
    let out = stack::run(&config, &w).expect("valid configuration");
    let (inputs, outputs) = lattice_task_from_trace(&out.trace);
    for (p, out) in &outputs {
        println!("{p}: proposed {:?}, decided {out:?}", inputs[p]);
    }
    for v in check_lattice_task(&inputs, &outputs, &ProcessId::all(n).collect()) {
        println!("{v}");
    }
}
