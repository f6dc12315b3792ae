//! Message counts and latencies, recomputed from a trace alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trace::{EventBody, Layer, OpId, Operation, PacketLabel, Time, Trace};
use crate::types::{MessageId, ProcessId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCost {
    pub id: MessageId,
    /// Point-to-point packets labelled FORWARD that carry this message.
    pub forward_sends: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastTiming {
    pub id: MessageId,
    pub proc: ProcessId,
    pub layer: Layer,
    pub invoked: Time,
    /// When the broadcaster itself delivered the message.
    pub self_delivered: Option<Time>,
    pub returned: Option<Time>,
}

impl BroadcastTiming {
    /// Invocation to own delivery.
    pub fn latency(&self) -> Option<Time> {
        self.self_delivered.map(|t| t - self.invoked)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    pub proc: ProcessId,
    pub op_id: OpId,
    pub op: String,
    pub latency: Option<Time>,
    /// Broadcasts the process invoked between this operation's invocation
    /// and response (or the end of the trace).
    pub scd_broadcasts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub total_sends: u64,
    pub forward_sends: u64,
    pub relay_sends: u64,
    pub messages: Vec<MessageCost>,
    pub broadcasts: Vec<BroadcastTiming>,
    pub operations: Vec<OpCost>,
    /// Messages over the n² FORWARD budget, and crash-free message-passing
    /// broadcasts slower than twice the delay bound.
    pub flags: Vec<String>,
}

impl Metrics {
    pub fn max_forward_sends(&self) -> u64 {
        self.messages.iter().map(|m| m.forward_sends).max().unwrap_or(0)
    }

    pub fn max_latency(&self) -> Option<Time> {
        self.broadcasts.iter().filter_map(BroadcastTiming::latency).max()
    }
}

pub fn report_metrics(trace: &Trace) -> Metrics {
    let n = trace.config.n;
    let mut m = Metrics { n, ..Metrics::default() };
    let mut per_msg: BTreeMap<MessageId, u64> = BTreeMap::new();
    let mut bcast: BTreeMap<MessageId, BroadcastTiming> = BTreeMap::new();
    let mut bcast_ops: BTreeMap<(ProcessId, Layer, OpId), MessageId> = BTreeMap::new();
    let mut open_obj: BTreeMap<(ProcessId, OpId), usize> = BTreeMap::new();

    for ev in &trace.events {
        match &ev.body {
            EventBody::NetSend { packet, .. } => {
                m.total_sends += 1;
                match packet.label {
                    PacketLabel::Forward => {
                        m.forward_sends += 1;
                        if let Some(id) = packet.msg {
                            *per_msg.entry(id).or_default() += 1;
                        }
                    }
                    PacketLabel::Relay => m.relay_sends += 1,
                    PacketLabel::Data => {}
                }
            }
            EventBody::Invoke { layer, op_id, op } => {
                if let Operation::Broadcast { id, .. } = op {
                    bcast.insert(
                        *id,
                        BroadcastTiming {
                            id: *id,
                            proc: ev.proc,
                            layer: *layer,
                            invoked: ev.time,
                            self_delivered: None,
                            returned: None,
                        },
                    );
                    bcast_ops.insert((ev.proc, *layer, *op_id), *id);
                    if *layer == Layer::Scd {
                        for (&(p, _), &k) in &open_obj {
                            if p == ev.proc {
                                m.operations[k].scd_broadcasts += 1;
                            }
                        }
                    }
                }
                if *layer == Layer::Object {
                    open_obj.insert((ev.proc, *op_id), m.operations.len());
                    m.operations.push(OpCost {
                        proc: ev.proc,
                        op_id: *op_id,
                        op: op.name().to_string(),
                        latency: Some(ev.time),
                        scd_broadcasts: 0,
                    });
                }
            }
            EventBody::Response { layer, op_id, .. } => {
                if let Some(id) = bcast_ops.get(&(ev.proc, *layer, *op_id)) {
                    bcast.get_mut(id).expect("indexed above").returned = Some(ev.time);
                }
                if *layer == Layer::Object {
                    if let Some(k) = open_obj.remove(&(ev.proc, *op_id)) {
                        let start = m.operations[k].latency.expect("set at invocation");
                        m.operations[k].latency = Some(ev.time - start);
                    }
                }
            }
            EventBody::ScdDeliver { layer, set } => {
                for id in set.ids() {
                    if let Some(b) = bcast.get_mut(&id) {
                        if b.proc == ev.proc && b.layer == *layer && b.self_delivered.is_none() {
                            b.self_delivered = Some(ev.time);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    for (_, k) in open_obj {
        m.operations[k].latency = None;
    }
    m.messages = bcast
        .keys()
        .filter(|id| bcast[id].layer == Layer::Scd)
        .map(|id| MessageCost { id: *id, forward_sends: per_msg.get(id).copied().unwrap_or(0) })
        .collect();
    m.broadcasts = bcast.into_values().collect();

    let budget = (n * n) as u64;
    for c in &m.messages {
        if c.forward_sends > budget {
            m.flags.push(format!("{} used {} FORWARD sends, over n^2 = {budget}", c.id, c.forward_sends));
        }
    }
    if let (Some(delta), true) = (trace.config.delay.delta(), trace.config.crashes.is_empty()) {
        for b in m.broadcasts.iter().filter(|b| b.layer == Layer::Scd) {
            if let Some(l) = b.latency().filter(|l| *l > 2 * delta) {
                m.flags.push(format!("{} delivered at its sender after {l}, over 2*delta = {}", b.id, 2 * delta));
            }
        }
    }
    m
}
