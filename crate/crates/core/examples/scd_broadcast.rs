//! Message-passing set-constrained delivery broadcast: delivered sets,
//! the property suite, and per-message cost.
//!
//! ```bash
//! cargo run --example scd_broadcast
//! ```

use scd_broadcast::checkers::check_scd_properties;
use scd_broadcast::metrics::report_metrics;
use scd_broadcast::sim::{Command, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::{EventBody, Layer};
use scd_broadcast::types::ProcessId;

fn main() {
    let n = 5;
    let config = SimConfig { n, t: 2, seed: 3, stack: StackKind::Scd, ..SimConfig::default() };
    let mut w = Workload::default();
    for (k, p) in ProcessId::all(n).enumerate() {
        w.push(k as u64 * 2, p, Command::Broadcast { data: format!("m{}", k + 1) });
    }
    let out = stack::run(&config, &w).expect("valid configuration");

    for ev in &out.trace.events {
        if let EventBody::ScdDeliver { layer: Layer::Scd, set } = &ev.body {
            let ids: Vec<String> = set.ids().map(|id| id.to_string()).collect();
            println!("t={:>3} {} delivers {{{}}}", ev.time, ev.proc, ids.join(", "));
        }
    }
    for v in check_scd_properties(&out.trace, Layer::Scd) {
        println!("{v}");
    }
    let m = report_metrics(&out.trace);
    println!(
        "FORWARD sends per message: max {} (n^2 = {}); worst invoke-to-delivery {:?} (2*delta = 20)",
        m.max_forward_sends(),
        n * n,
        m.max_latency()
    );
}
