//! Set-constrained delivery built from snapshot objects: first over an atomic
//! snapshot oracle with all but one process crashing, then over snapshots that
//! are themselves built on message-passing set-constrained delivery.
//!
//! ```bash
//! cargo run --example scd_from_snapshots
//! ```

use scd_broadcast::runner::run_checked;
use scd_broadcast::sim::{Command, CrashSpec, SimConfig, StackKind, Workload};
use scd_broadcast::types::ProcessId;
use scd_broadcast::verify::CheckOptions;

fn workload(n: usize) -> Workload {
    let mut w = Workload::default();
    for (k, p) in ProcessId::all(n).enumerate() {
        w.push(k as u64 * 3, p, Command::Broadcast { data: format!("m{k}") });
    }
    w
}

fn main() {
    let p = ProcessId::new;
    let oracle = SimConfig {
        n: 4,
        t: 3,
        seed: 1,
        stack: StackKind::ShmScd,
        crashes: vec![
            CrashSpec { proc: p(2), time: 4, cut: None },
            CrashSpec { proc: p(3), time: 20, cut: None },
            CrashSpec { proc: p(4), time: 35, cut: None },
        ],
        ..SimConfig::default()
    };
    let round_trip = SimConfig { n: 3, t: 1, seed: 1, stack: StackKind::ShmScdRoundtrip, ..SimConfig::default() };
    for config in [oracle, round_trip] {
        let c = run_checked(&config, &workload(config.n), &CheckOptions::default()).expect("valid configuration");
        println!("{:?}: ended at t={}, {} events", config.stack, c.report.end_time, c.trace.events.len());
        for v in &c.verdicts {
            println!("  {v}");
        }
    }
}
