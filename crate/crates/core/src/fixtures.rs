//! Hand-built delivery patterns over eight messages `m1..m8`.
//!
//! Message `mk` is the `k`-th broadcast of `p1` (sequence number `k - 1`).
//! Every broadcast is invoked and answered before any delivery, so the
//! patterns exercise the ordering properties alone.

use crate::sim::SimConfig;
use crate::trace::{Event, EventBody, Layer, OpResult, Operation, Trace};
use crate::types::{AppMessage, MessageId, Payload, ProcessId};

/// The id of `mk`.
pub fn m(k: u64) -> MessageId {
    MessageId::new(ProcessId::new(1), k - 1)
}

/// `sets[i]` lists, for process `p(i+1)`, its delivered sets by message number.
pub fn delivery_pattern(sets: &[&[&[u64]]]) -> Trace {
    let n = sets.len();
    let count = sets.iter().flat_map(|s| s.iter()).flat_map(|s| s.iter()).copied().max().unwrap_or(0);
    let mut events = Vec::new();
    let mut push = |proc: ProcessId, body: EventBody| {
        let seq = events.len() as u64;
        events.push(Event { time: seq, seq, proc, body });
    };
    let p1 = ProcessId::new(1);
    let msg = |k: u64| AppMessage::new(m(k), Payload::data(format!("m{k}")));
    for k in 1..=count {
        let op = Operation::Broadcast { id: m(k), payload: msg(k).payload };
        push(p1, EventBody::Invoke { layer: Layer::Scd, op_id: k, op });
        push(p1, EventBody::Response { layer: Layer::Scd, op_id: k, result: OpResult::Ack });
    }
    for (i, per) in sets.iter().enumerate() {
        for set in *per {
            let set = set.iter().map(|k| msg(*k)).collect();
            push(ProcessId::from_slot(i), EventBody::ScdDeliver { layer: Layer::Scd, set });
        }
    }
    let config = SimConfig { n, t: (n - 1) / 2, ..SimConfig::default() };
    Trace::new(config, events)
}

/// Three processes delivering `m1..m8` in sets that respect every property.
pub fn positive_example() -> Trace {
    delivery_pattern(&[
        &[&[1, 2], &[3, 4, 5], &[6], &[7, 8]],
        &[&[1], &[3, 2], &[6, 4, 5], &[7], &[8]],
        &[&[3, 1, 2], &[6, 4, 5], &[7], &[8]],
    ])
}

/// `p1` delivers `m2` strictly before `m3`, `p2` the opposite.
pub fn negative_example() -> Trace {
    delivery_pattern(&[&[&[1, 2], &[3, 4, 5]], &[&[1, 3], &[2]]])
}
