//! Uniform FIFO broadcast: a sender that crashes mid-send still has its
//! message delivered everywhere, in order, thanks to echo relays.
//!
//! ```bash
//! cargo run --example fifo_broadcast
//! ```

use scd_broadcast::checkers::fifo::check_fifo;
use scd_broadcast::sim::{Command, CrashSpec, SimConfig, StackKind, Workload};
use scd_broadcast::stack;
use scd_broadcast::trace::EventBody;
use scd_broadcast::types::ProcessId;

fn main() {
    let p1 = ProcessId::new(1);
    let config = SimConfig {
        n: 4,
        t: 1,
        seed: 9,
        stack: StackKind::Fifo,
        crashes: vec![CrashSpec { proc: p1, time: 2, cut: Some(1) }],
        ..SimConfig::default()
    };
    let mut w = Workload::default();
    w.push(0, p1, Command::Broadcast { data: "first".into() });
    w.push(1, p1, Command::Broadcast { data: "second".into() });
    w.push(2, p1, Command::Broadcast { data: "cut short".into() });

    let out = stack::run(&config, &w).expect("valid configuration");
    for ev in &out.trace.events {
        if let EventBody::FifoDeliver { origin, fsn, .. } = &ev.body {
            println!("t={:>3} {} delivers ({origin}, {fsn})", ev.time, ev.proc);
        }
    }
    for v in check_fifo(&out.trace) {
        println!("{v}");
    }
}
