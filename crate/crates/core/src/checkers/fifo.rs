//! FIFO broadcast properties over `fifo_deliver` events.

use std::collections::{BTreeMap, BTreeSet};

use super::{Verdict, Witness};
use crate::trace::{EventBody, Trace};
use crate::types::ProcessId;

/// Per-sender order, at-most-once delivery, and uniform delivery to every
/// non-faulty process.
pub fn check_fifo(trace: &Trace) -> Vec<Verdict> {
    let mut per: BTreeMap<ProcessId, Vec<(ProcessId, u64)>> =
        ProcessId::all(trace.config.n).map(|p| (p, Vec::new())).collect();
    for ev in &trace.events {
        if let EventBody::FifoDeliver { origin, fsn, .. } = ev.body {
            per.entry(ev.proc).or_default().push((origin, fsn));
        }
    }
    let mut order = Ok(());
    let mut integrity = Ok(());
    'outer: for (p, ds) in &per {
        let mut seen = BTreeSet::new();
        let mut next: BTreeMap<ProcessId, u64> = BTreeMap::new();
        for &(o, fsn) in ds {
            if !seen.insert((o, fsn)) {
                integrity = Err(Witness::Text { text: format!("{p} delivered ({o}, {fsn}) twice") });
                break 'outer;
            }
            let want = next.entry(o).or_insert(0);
            if fsn != *want {
                order = Err(Witness::Text { text: format!("{p} delivered ({o}, {fsn}) expecting {want}") });
                break 'outer;
            }
            *want += 1;
        }
    }
    let faulty = trace.faulty();
    let all: BTreeSet<(ProcessId, u64)> = per.values().flatten().copied().collect();
    let uniform = per
        .iter()
        .filter(|(p, _)| !faulty.contains(p))
        .find_map(|(p, ds)| {
            let got: BTreeSet<_> = ds.iter().copied().collect();
            all.iter().find(|x| !got.contains(x)).map(|(o, fsn)| Witness::Text {
                text: format!("{p} never delivered ({o}, {fsn})"),
            })
        })
        .map_or(Ok(()), Err);
    vec![
        Verdict::from_result("fifo_order", order),
        Verdict::from_result("fifo_integrity", integrity),
        Verdict::from_result("fifo_uniform_termination", uniform),
    ]
}
