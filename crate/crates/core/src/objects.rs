//! Shared objects built on set-constrained delivery broadcast.
//!
//! Every object follows the same communication pattern: an operation
//! broadcasts zero, one or two messages, each time waiting until a delivered
//! set contains a message it issued itself, and every replica folds each
//! delivered set into its local state as a whole.
//!
//! Replicas are pure state machines: they return [`ReplicaEffect`]s and never
//! see the network. [`crate::stack`] hosts them on a broadcast service.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::trace::{OpResult, Operation};
use crate::types::{MessageSet, Payload, ProcessId, RegValue, Timestamp};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplicaEffect {
    Broadcast(Payload),
    Respond(OpResult),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectError {
    #[error("register {reg} outside 0..{m}")]
    RegisterOutOfRange { reg: usize, m: usize },
    #[error("{0} already proposed")]
    DoubleProposal(ProcessId),
    #[error("operation {op} is not supported by this object")]
    Unsupported { op: &'static str },
    #[error("an operation is already pending")]
    Busy,
}

/// A replica of one shared object at one process.
pub trait Replica {
    fn invoke(&mut self, op: &Operation) -> Result<Vec<ReplicaEffect>, ObjectError>;
    fn on_deliver(&mut self, set: &MessageSet) -> Vec<ReplicaEffect>;
}

/// The `done` rule: the set carries a message issued by `me`.
pub fn issued_by(set: &MessageSet, me: ProcessId) -> bool {
    set.iter().any(|m| m.payload.issuer() == Some(me))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Atomic,
    /// No SYNC rounds: snapshots are local, writes take one round.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum SnapPhase {
    Idle,
    SnapshotSync,
    WriteSync { reg: usize, value: RegValue },
    Write,
}

/// Multi-writer multi-reader snapshot object replica.
#[derive(Clone, Debug)]
pub struct SnapshotReplica {
    me: ProcessId,
    mode: Consistency,
    reg: Vec<RegValue>,
    tsa: Vec<Timestamp>,
    phase: SnapPhase,
}

impl SnapshotReplica {
    pub fn new(me: ProcessId, mode: Consistency, initial: Vec<RegValue>) -> Self {
        let m = initial.len();
        SnapshotReplica { me, mode, reg: initial, tsa: vec![Timestamp::INITIAL; m], phase: SnapPhase::Idle }
    }

    /// `m` integer registers, all 0.
    pub fn with_int_registers(me: ProcessId, mode: Consistency, m: usize) -> Self {
        Self::new(me, mode, vec![RegValue::Int(0); m])
    }

    pub fn values(&self) -> &[RegValue] {
        &self.reg
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.tsa
    }

    fn write_payload(&self, reg: usize, value: RegValue) -> Payload {
        let ts = Timestamp::new(self.tsa[reg].date + 1, self.me);
        Payload::Write { from: self.me, reg, value, ts }
    }

    /// Installs, per register, the greatest-stamped WRITE of the set when it
    /// beats the local stamp. Nothing else changes.
    pub fn apply_writes(&mut self, set: &MessageSet) {
        let mut best: BTreeMap<usize, (Timestamp, &RegValue)> = BTreeMap::new();
        for m in set {
            if let Payload::Write { reg, value, ts, .. } = &m.payload {
                assert!(*reg < self.reg.len(), "WRITE to register {reg} of {}", self.reg.len());
                let e = best.entry(*reg).or_insert((*ts, value));
                if e.0 < *ts {
                    *e = (*ts, value);
                }
            }
        }
        for (r, (ts, v)) in best {
            if self.tsa[r] < ts {
                self.tsa[r] = ts;
                self.reg[r] = v.clone();
            }
        }
    }
}

impl Replica for SnapshotReplica {
    fn invoke(&mut self, op: &Operation) -> Result<Vec<ReplicaEffect>, ObjectError> {
        if self.phase != SnapPhase::Idle {
            return Err(ObjectError::Busy);
        }
        let sync = || vec![ReplicaEffect::Broadcast(Payload::Sync { from: self.me })];
        match (op, self.mode) {
            (Operation::Snapshot, Consistency::Atomic) => {
                self.phase = SnapPhase::SnapshotSync;
                Ok(sync())
            }
            (Operation::Snapshot, Consistency::Sequential) => {
                Ok(vec![ReplicaEffect::Respond(OpResult::Snapshot { values: self.reg.clone() })])
            }
            (Operation::Write { reg, value }, mode) => {
                if *reg >= self.reg.len() {
                    return Err(ObjectError::RegisterOutOfRange { reg: *reg, m: self.reg.len() });
                }
                if mode == Consistency::Atomic {
                    self.phase = SnapPhase::WriteSync { reg: *reg, value: value.clone() };
                    Ok(sync())
                } else {
                    self.phase = SnapPhase::Write;
                    Ok(vec![ReplicaEffect::Broadcast(self.write_payload(*reg, value.clone()))])
                }
            }
            (other, _) => Err(ObjectError::Unsupported { op: other.name() }),
        }
    }

    fn on_deliver(&mut self, set: &MessageSet) -> Vec<ReplicaEffect> {
        self.apply_writes(set);
        if !issued_by(set, self.me) {
            return Vec::new();
        }
        match std::mem::replace(&mut self.phase, SnapPhase::Idle) {
            SnapPhase::Idle => Vec::new(),
            SnapPhase::SnapshotSync => {
                vec![ReplicaEffect::Respond(OpResult::Snapshot { values: self.reg.clone() })]
            }
            SnapPhase::WriteSync { reg, value } => {
                self.phase = SnapPhase::Write;
                vec![ReplicaEffect::Broadcast(self.write_payload(reg, value))]
            }
            SnapPhase::Write => vec![ReplicaEffect::Respond(OpResult::Ack)],
        }
    }
}

/// Net effect of the PLUS and MINUS messages of a set.
fn plus_minus(set: &MessageSet) -> i64 {
    set.iter()
        .map(|m| match m.payload {
            Payload::Plus { .. } => 1,
            Payload::Minus { .. } => -1,
            _ => 0,
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CounterPhase {
    Idle,
    Update,
    Read,
}

/// Atomic counter replica: every operation is one broadcast round.
#[derive(Clone, Debug)]
pub struct CounterReplica {
    me: ProcessId,
    counter: i64,
    phase: CounterPhase,
}

impl CounterReplica {
    pub fn new(me: ProcessId) -> Self {
        CounterReplica { me, counter: 0, phase: CounterPhase::Idle }
    }

    pub fn value(&self) -> i64 {
        self.counter
    }
}

impl Replica for CounterReplica {
    fn invoke(&mut self, op: &Operation) -> Result<Vec<ReplicaEffect>, ObjectError> {
        if self.phase != CounterPhase::Idle {
            return Err(ObjectError::Busy);
        }
        let (phase, payload) = match op {
            Operation::Increase => (CounterPhase::Update, Payload::Plus { from: self.me }),
            Operation::Decrease => (CounterPhase::Update, Payload::Minus { from: self.me }),
            Operation::Read => (CounterPhase::Read, Payload::Sync { from: self.me }),
            other => return Err(ObjectError::Unsupported { op: other.name() }),
        };
        self.phase = phase;
        Ok(vec![ReplicaEffect::Broadcast(payload)])
    }

    fn on_deliver(&mut self, set: &MessageSet) -> Vec<ReplicaEffect> {
        self.counter += plus_minus(set);
        if !issued_by(set, self.me) {
            return Vec::new();
        }
        match std::mem::replace(&mut self.phase, CounterPhase::Idle) {
            CounterPhase::Idle => Vec::new(),
            CounterPhase::Update => vec![ReplicaEffect::Respond(OpResult::Ack)],
            CounterPhase::Read => vec![ReplicaEffect::Respond(OpResult::Value { value: self.counter })],
        }
    }
}

/// Sequentially consistent counter: updates return at once, a read waits
/// until all of its own updates have been delivered locally.
#[derive(Clone, Debug)]
pub struct ScCounterReplica {
    me: ProcessId,
    counter: i64,
    lsc: u64,
    read_waiting: bool,
}

impl ScCounterReplica {
    pub fn new(me: ProcessId) -> Self {
        ScCounterReplica { me, counter: 0, lsc: 0, read_waiting: false }
    }

    pub fn value(&self) -> i64 {
        self.counter
    }

    /// Own updates broadcast but not yet delivered here.
    pub fn lsc(&self) -> u64 {
        self.lsc
    }
}

impl Replica for ScCounterReplica {
    fn invoke(&mut self, op: &Operation) -> Result<Vec<ReplicaEffect>, ObjectError> {
        if self.read_waiting {
            return Err(ObjectError::Busy);
        }
        let payload = match op {
            Operation::Increase => Payload::Plus { from: self.me },
            Operation::Decrease => Payload::Minus { from: self.me },
            Operation::Read if self.lsc == 0 => {
                return Ok(vec![ReplicaEffect::Respond(OpResult::Value { value: self.counter })]);
            }
            Operation::Read => {
                self.read_waiting = true;
                return Ok(Vec::new());
            }
            other => return Err(ObjectError::Unsupported { op: other.name() }),
        };
        self.lsc += 1;
        Ok(vec![ReplicaEffect::Broadcast(payload), ReplicaEffect::Respond(OpResult::Ack)])
    }

    fn on_deliver(&mut self, set: &MessageSet) -> Vec<ReplicaEffect> {
        self.counter += plus_minus(set);
        let own = set
            .iter()
            .filter(|m| matches!(m.payload, Payload::Plus { from } | Payload::Minus { from } if from == self.me))
            .count() as u64;
        self.lsc = self.lsc.checked_sub(own).expect("more own updates delivered than issued");
        if self.read_waiting && self.lsc == 0 {
            self.read_waiting = false;
            return vec![ReplicaEffect::Respond(OpResult::Value { value: self.counter })];
        }
        Vec::new()
    }
}

/// A join-semilattice.
pub trait Semilattice: Clone + Eq {
    fn join(&self, other: &Self) -> Self;

    fn leq(&self, other: &Self) -> bool {
        self.join(other) == *other
    }
}

impl Semilattice for BTreeSet<i64> {
    fn join(&self, other: &Self) -> Self {
        self.union(other).copied().collect()
    }

    fn leq(&self, other: &Self) -> bool {
        self.is_subset(other)
    }
}

/// Lattice agreement over integer sets under union.
#[derive(Clone, Debug)]
pub struct LatticeReplica {
    me: ProcessId,
    out: BTreeSet<i64>,
    proposed: bool,
    waiting: bool,
}

impl LatticeReplica {
    pub fn new(me: ProcessId) -> Self {
        LatticeReplica { me, out: BTreeSet::new(), proposed: false, waiting: false }
    }

    pub fn output(&self) -> &BTreeSet<i64> {
        &self.out
    }
}

impl Replica for LatticeReplica {
    fn invoke(&mut self, op: &Operation) -> Result<Vec<ReplicaEffect>, ObjectError> {
        let Operation::Propose { value } = op else {
            return Err(ObjectError::Unsupported { op: op.name() });
        };
        if self.proposed {
            return Err(ObjectError::DoubleProposal(self.me));
        }
        self.proposed = true;
        self.waiting = true;
        self.out = self.out.join(value);
        Ok(vec![ReplicaEffect::Broadcast(Payload::Propose { from: self.me, value: value.clone() })])
    }

    fn on_deliver(&mut self, set: &MessageSet) -> Vec<ReplicaEffect> {
        for m in set {
            if let Payload::Propose { value, .. } = &m.payload {
                self.out = self.out.join(value);
            }
        }
        if self.waiting && issued_by(set, self.me) {
            self.waiting = false;
            return vec![ReplicaEffect::Respond(OpResult::Decided { value: self.out.clone() })];
        }
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AppMessage, MessageId};

    fn p(i: u32) -> ProcessId {
        ProcessId::new(i)
    }

    fn set(payloads: Vec<Payload>) -> MessageSet {
        payloads
            .into_iter()
            .enumerate()
            .map(|(k, pl)| AppMessage::new(MessageId::new(p(9), k as u64), pl))
            .collect()
    }

    fn write(from: u32, reg: usize, v: i64, date: u64) -> Payload {
        Payload::Write { from: p(from), reg, value: RegValue::Int(v), ts: Timestamp::new(date, p(from)) }
    }

    #[test]
    fn snapshot_with_no_writes_returns_initial_values() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Atomic, 2);
        assert_eq!(r.invoke(&Operation::Snapshot).unwrap(), vec![ReplicaEffect::Broadcast(Payload::Sync { from: p(1) })]);
        let out = r.on_deliver(&set(vec![Payload::Sync { from: p(1) }]));
        assert_eq!(out, vec![ReplicaEffect::Respond(OpResult::Snapshot { values: vec![RegValue::Int(0); 2] })]);
    }

    #[test]
    fn sync_only_set_leaves_registers_alone() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Atomic, 2);
        r.on_deliver(&set(vec![Payload::Sync { from: p(2) }, Payload::Sync { from: p(3) }]));
        assert_eq!(r.values(), &[RegValue::Int(0), RegValue::Int(0)]);
    }

    #[test]
    fn same_date_tie_goes_to_higher_process() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Atomic, 1);
        r.on_deliver(&set(vec![write(3, 0, 30, 1), write(2, 0, 20, 1)]));
        assert_eq!(r.values(), &[RegValue::Int(30)]);
        assert_eq!(r.timestamps(), &[Timestamp::new(1, p(3))]);
    }

    #[test]
    fn stale_write_is_ignored() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Atomic, 1);
        r.on_deliver(&set(vec![write(2, 0, 5, 2)]));
        r.on_deliver(&set(vec![write(3, 0, 7, 1)]));
        assert_eq!(r.values(), &[RegValue::Int(5)]);
    }

    #[test]
    fn atomic_write_takes_two_rounds_and_bumps_the_date() {
        let mut r = SnapshotReplica::with_int_registers(p(2), Consistency::Atomic, 1);
        r.on_deliver(&set(vec![write(1, 0, 9, 4)]));
        let e = r.invoke(&Operation::Write { reg: 0, value: RegValue::Int(1) }).unwrap();
        assert_eq!(e, vec![ReplicaEffect::Broadcast(Payload::Sync { from: p(2) })]);
        let e = r.on_deliver(&set(vec![Payload::Sync { from: p(2) }]));
        assert_eq!(e, vec![ReplicaEffect::Broadcast(write(2, 0, 1, 5))]);
        let e = r.on_deliver(&set(vec![write(2, 0, 1, 5)]));
        assert_eq!(e, vec![ReplicaEffect::Respond(OpResult::Ack)]);
        assert_eq!(r.values(), &[RegValue::Int(1)]);
    }

    #[test]
    fn sequential_snapshot_is_local() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Sequential, 1);
        let e = r.invoke(&Operation::Snapshot).unwrap();
        assert_eq!(e, vec![ReplicaEffect::Respond(OpResult::Snapshot { values: vec![RegValue::Int(0)] })]);
    }

    #[test]
    fn write_out_of_range_is_rejected() {
        let mut r = SnapshotReplica::with_int_registers(p(1), Consistency::Atomic, 2);
        assert_eq!(
            r.invoke(&Operation::Write { reg: 2, value: RegValue::Int(0) }),
            Err(ObjectError::RegisterOutOfRange { reg: 2, m: 2 })
        );
    }

    #[test]
    fn counter_applies_net_plus_minus() {
        let mut c = CounterReplica::new(p(1));
        c.on_deliver(&set(vec![
            Payload::Plus { from: p(2) },
            Payload::Plus { from: p(3) },
            Payload::Minus { from: p(2) },
            Payload::Plus { from: p(4) },
        ]));
        assert_eq!(c.value(), 2);
    }

    #[test]
    fn sc_counter_update_returns_immediately_and_read_waits() {
        let mut c = ScCounterReplica::new(p(1));
        let e = c.invoke(&Operation::Increase).unwrap();
        assert_eq!(e[1], ReplicaEffect::Respond(OpResult::Ack));
        assert_eq!(c.lsc(), 1);
        assert!(c.invoke(&Operation::Read).unwrap().is_empty());
        let e = c.on_deliver(&set(vec![Payload::Plus { from: p(1) }]));
        assert_eq!(e, vec![ReplicaEffect::Respond(OpResult::Value { value: 1 })]);
    }

    #[test]
    fn lattice_single_proposer_decides_its_input() {
        let mut l = LatticeReplica::new(p(1));
        let v: BTreeSet<i64> = [7].into();
        l.invoke(&Operation::Propose { value: v.clone() }).unwrap();
        let e = l.on_deliver(&set(vec![Payload::Propose { from: p(1), value: v.clone() }]));
        assert_eq!(e, vec![ReplicaEffect::Respond(OpResult::Decided { value: v })]);
        assert!(matches!(
            l.invoke(&Operation::Propose { value: BTreeSet::new() }),
            Err(ObjectError::DoubleProposal(_))
        ));
    }

    #[test]
    fn lattice_keeps_values_delivered_before_proposing() {
        let mut l = LatticeReplica::new(p(1));
        l.on_deliver(&set(vec![Payload::Propose { from: p(2), value: [2].into() }]));
        l.invoke(&Operation::Propose { value: [1].into() }).unwrap();
        let e = l.on_deliver(&set(vec![Payload::Propose { from: p(1), value: [1].into() }]));
        assert_eq!(e, vec![ReplicaEffect::Respond(OpResult::Decided { value: [1, 2].into() })]);
    }
}
