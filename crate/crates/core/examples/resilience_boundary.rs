//! With a majority of initial crashes a broadcast can never complete; with
//! one crash fewer it does.
//!
//! ```bash
//! cargo run --example resilience_boundary
//! ```

use scd_broadcast::runner::run_checked;
use scd_broadcast::scenario::Expectation;
use scd_broadcast::sim::{Command, CrashSpec, SimConfig, Workload};
use scd_broadcast::types::ProcessId;
use scd_broadcast::verify::CheckOptions;

fn main() {
    let n: usize = 5;
    let mut w = Workload::default();
    w.push(1, ProcessId::new(1), Command::Broadcast { data: "m".into() });
    for crashes in [n.div_ceil(2), n.div_ceil(2) - 1] {
        let config = SimConfig {
            n,
            t: crashes,
            crashes: (0..crashes).map(|k| CrashSpec { proc: ProcessId::from_slot(n - 1 - k), time: 0, cut: None }).collect(),
            ..SimConfig::default()
        };
        let expect = (crashes * 2 >= n).then_some(Expectation::Starvation);
        let c = run_checked(&config, &w, &CheckOptions { expect, ..CheckOptions::default() }).expect("valid");
        println!("{crashes} crashes: {} pending at t={}", c.report.pending_ops.len(), c.report.end_time);
        for v in c.verdicts.iter().filter(|v| v.property.starts_with("termination") || v.property.starts_with("expected")) {
            println!("  {v}");
        }
    }
}
