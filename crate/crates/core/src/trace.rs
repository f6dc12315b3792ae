//! The simulation log: events, traces, line-delimited JSON encoding and the
//! structural validator every generated trace is run through.
//!
//! # File format
//!
//! A trace file is UTF-8 JSON lines. Line 1 is a header object
//! `{"config": <SimConfig>}`. Every following line is one event:
//!
//! ```text
//! {"time":12,"seq":40,"proc":2,"kind":"scd_deliver","detail":{"layer":"scd","set":[...]}}
//! ```
//!
//! | field    | meaning                                                       |
//! |----------|---------------------------------------------------------------|
//! | `time`   | simulated time in integer ticks                               |
//! | `seq`    | global tiebreak counter, strictly increasing along the file   |
//! | `proc`   | 1-based process id                                            |
//! | `kind`   | one of `invoke`, `response`, `scd_deliver`, `net_send`, `net_recv`, `fifo_deliver`, `crash`, `shm_write`, `shm_snapshot` |
//! | `detail` | kind-specific object, see [`EventBody`]                       |

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimConfig;
use crate::types::{MessageId, MessageSet, Payload, ProcessId, RegValue, SeqNum};

/// Simulated time, in integer ticks.
pub type Time = u64;

/// Identifier of an invoked operation, unique within a run.
pub type OpId = u64;

/// Which abstraction an invoke/response/delivery event belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    /// Uniform FIFO broadcast.
    Fifo,
    /// Message-passing set-constrained delivery broadcast.
    Scd,
    /// Set-constrained delivery broadcast built from snapshot objects.
    ShmScd,
    /// Snapshot, counter and lattice-agreement operations.
    Object,
}

/// The two shared snapshot objects of the shared-memory construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShmObject {
    Sent,
    SetSeq,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    Broadcast { id: MessageId, payload: Payload },
    Write { reg: usize, value: RegValue },
    Snapshot,
    Increase,
    Decrease,
    Read,
    Propose { value: BTreeSet<i64> },
}

impl Operation {
    /// Snapshots and reads leave the object state unchanged.
    pub fn is_query(&self) -> bool {
        matches!(self, Operation::Snapshot | Operation::Read)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operation::Broadcast { .. } => "broadcast",
            Operation::Write { .. } => "write",
            Operation::Snapshot => "snapshot",
            Operation::Increase => "inc",
            Operation::Decrease => "dec",
            Operation::Read => "read",
            Operation::Propose { .. } => "propose",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum OpResult {
    Ack,
    Snapshot { values: Vec<RegValue> },
    Value { value: i64 },
    Decided { value: BTreeSet<i64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketLabel {
    /// A FORWARD protocol message fifo-broadcast by the set-constrained layer.
    Forward,
    /// An echo of someone else's fifo broadcast.
    Relay,
    /// Any other fifo payload.
    Data,
}

/// What the trace records about a point-to-point packet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketInfo {
    /// Unique per physical send; matches a `net_recv` to its `net_send`.
    pub id: u64,
    pub label: PacketLabel,
    /// Process that fifo-broadcast the payload (the forwarder for FORWARD packets).
    pub origin: ProcessId,
    pub fsn: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<MessageId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sn_f: Option<SeqNum>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum EventBody {
    Invoke { layer: Layer, op_id: OpId, op: Operation },
    Response { layer: Layer, op_id: OpId, result: OpResult },
    ScdDeliver { layer: Layer, set: MessageSet },
    NetSend { to: ProcessId, packet: PacketInfo },
    NetRecv { from: ProcessId, packet: PacketInfo },
    FifoDeliver {
        origin: ProcessId,
        fsn: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        msg: Option<MessageId>,
    },
    Crash {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cut: Option<usize>,
    },
    ShmWrite { object: ShmObject, value: RegValue },
    ShmSnapshot { object: ShmObject, view: Vec<RegValue> },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Invoke { .. } => "invoke",
            EventBody::Response { .. } => "response",
            EventBody::ScdDeliver { .. } => "scd_deliver",
            EventBody::NetSend { .. } => "net_send",
            EventBody::NetRecv { .. } => "net_recv",
            EventBody::FifoDeliver { .. } => "fifo_deliver",
            EventBody::Crash { .. } => "crash",
            EventBody::ShmWrite { .. } => "shm_write",
            EventBody::ShmSnapshot { .. } => "shm_snapshot",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: Time,
    pub seq: u64,
    pub proc: ProcessId,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("trace file has no header line")]
    MissingHeader,
    #[error("{proc} delivered only {delivered} sets, prefix of {requested} requested")]
    PrefixOutOfRange { proc: ProcessId, delivered: usize, requested: usize },
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: SimConfig,
}

/// An immutable record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub config: SimConfig,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(config: SimConfig, events: Vec<Event>) -> Self {
        Trace { config, events }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let header = Header { config: self.config.clone() };
        serde_json::to_writer(&mut w, &header).map_err(|e| TraceError::Parse { line: 1, source: e })?;
        w.write_all(b"\n")?;
        for (i, ev) in self.events.iter().enumerate() {
            serde_json::to_writer(&mut w, ev)
                .map_err(|e| TraceError::Parse { line: i + 2, source: e })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| match l {
            Ok(s) => !s.trim().is_empty(),
            Err(_) => true,
        });
        let (_, first) = lines.next().ok_or(TraceError::MissingHeader)?;
        let header: Header = serde_json::from_str(&first?)
            .map_err(|e| TraceError::Parse { line: 1, source: e })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            let ev: Event = serde_json::from_str(&line?)
                .map_err(|e| TraceError::Parse { line: i + 1, source: e })?;
            events.push(ev);
        }
        Ok(Trace { config: header.config, events })
    }

    /// Per-process sequences of sets delivered at `layer`, in delivery order.
    /// Every process of the configuration has an entry.
    pub fn deliveries(&self, layer: Layer) -> BTreeMap<ProcessId, Vec<Vec<MessageId>>> {
        let mut out: BTreeMap<ProcessId, Vec<Vec<MessageId>>> =
            ProcessId::all(self.config.n).map(|p| (p, Vec::new())).collect();
        for ev in &self.events {
            if let EventBody::ScdDeliver { layer: l, set } = &ev.body {
                if *l == layer {
                    out.entry(ev.proc).or_default().push(set.ids().collect());
                }
            }
        }
        out
    }

    /// Processes that crash according to the configuration's schedule.
    pub fn faulty(&self) -> BTreeSet<ProcessId> {
        self.config.crashes.iter().map(|c| c.proc).collect()
    }

    pub fn crash_time(&self, p: ProcessId) -> Option<Time> {
        self.events.iter().find_map(|e| match e.body {
            EventBody::Crash { .. } if e.proc == p => Some(e.time),
            _ => None,
        })
    }
}

/// Union of the first `x` sets delivered by `proc` at `layer`.
pub fn delivered_prefix_union(
    trace: &Trace,
    layer: Layer,
    proc: ProcessId,
    x: usize,
) -> Result<BTreeSet<MessageId>, TraceError> {
    let mut out = BTreeSet::new();
    let mut seen = 0;
    for ev in &trace.events {
        if seen == x {
            break;
        }
        if let EventBody::ScdDeliver { layer: l, set } = &ev.body {
            if *l == layer && ev.proc == proc {
                out.extend(set.ids());
                seen += 1;
            }
        }
    }
    if seen < x {
        return Err(TraceError::PrefixOutOfRange { proc, delivered: seen, requested: x });
    }
    Ok(out)
}

/// First structural defect found in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event #{index}: {reason}")]
pub struct StructuralViolation {
    pub index: usize,
    pub reason: String,
}

/// Checks the invariants every simulator-produced trace must satisfy:
/// strictly increasing `(time, seq)`, nothing attributed to a process after its
/// crash, every `net_recv` matching an earlier `net_send`, responses matching
/// earlier invocations, and non-overlapping client operations per process
/// (the message-passing broadcast layer is exempt: fast counter updates leave
/// several of its invocations open at once).
pub fn validate(trace: &Trace) -> Result<(), StructuralViolation> {
    let fail = |index: usize, reason: String| Err(StructuralViolation { index, reason });
    let mut last: Option<(Time, u64)> = None;
    let mut crashed: BTreeSet<ProcessId> = BTreeSet::new();
    // packet id -> (sender, destination, received?)
    let mut sends: BTreeMap<u64, (ProcessId, ProcessId, bool)> = BTreeMap::new();
    let mut open: BTreeMap<(ProcessId, Layer, OpId), ()> = BTreeMap::new();
    let mut closed: BTreeSet<(ProcessId, Layer, OpId)> = BTreeSet::new();
    let n = trace.config.n;

    for (i, ev) in trace.events.iter().enumerate() {
        if let Some(prev) = last {
            if (ev.time, ev.seq) <= prev || ev.seq <= prev.1 {
                return fail(i, format!("(time, seq) = ({}, {}) does not increase", ev.time, ev.seq));
            }
        }
        last = Some((ev.time, ev.seq));
        if ev.proc.slot() >= n {
            return fail(i, format!("{} outside 1..={n}", ev.proc));
        }
        if crashed.contains(&ev.proc) {
            return fail(i, format!("{} acts after crashing", ev.proc));
        }
        match &ev.body {
            EventBody::Crash { .. } => {
                crashed.insert(ev.proc);
            }
            EventBody::NetSend { to, packet } => {
                if sends.insert(packet.id, (ev.proc, *to, false)).is_some() {
                    return fail(i, format!("packet {} sent twice", packet.id));
                }
            }
            EventBody::NetRecv { from, packet } => match sends.get_mut(&packet.id) {
                Some((src, dst, received)) if *src == *from && *dst == ev.proc && !*received => {
                    *received = true;
                }
                Some(_) => return fail(i, format!("packet {} received inconsistently", packet.id)),
                None => return fail(i, format!("packet {} received before being sent", packet.id)),
            },
            EventBody::Invoke { layer, op_id, .. } => {
                let key = (ev.proc, *layer, *op_id);
                if open.contains_key(&key) || closed.contains(&key) {
                    return fail(i, format!("operation {op_id} invoked twice"));
                }
                if *layer != Layer::Scd && open.keys().any(|(p, l, _)| *p == ev.proc && l == layer) {
                    return fail(i, format!("{} overlaps operations at {:?}", ev.proc, layer));
                }
                open.insert(key, ());
            }
            EventBody::Response { layer, op_id, .. } => {
                let key = (ev.proc, *layer, *op_id);
                if open.remove(&key).is_none() {
                    return fail(i, format!("response to unknown operation {op_id}"));
                }
                closed.insert(key);
            }
            _ => {}
        }
    }
    Ok(())
}
