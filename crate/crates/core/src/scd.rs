//! Set-constrained delivery broadcast in the asynchronous message-passing
//! model with a correct majority, layered on uniform FIFO broadcast.
//!
//! [`ScdProcess`] is the bare per-process state machine; it emits
//! [`ScdAction`]s instead of touching the network. [`MpScd`] wires it to a
//! [`FifoBroadcast`] and to the trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fifo::{FifoBroadcast, FifoPacket, Labeled};
use crate::sim::{Ctx, RelayMode};
use crate::trace::{EventBody, Layer, OpId, OpResult, Operation, PacketLabel};
use crate::types::{AppMessage, MessageId, MessageSet, Payload, ProcessId, SeqNum};

/// A forwarding date, or the not-yet-forwarded sentinel that exceeds them all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cl {
    Finite(SeqNum),
    Inf,
}

impl Cl {
    pub fn is_finite(self) -> bool {
        matches!(self, Cl::Finite(_))
    }
}

impl fmt::Display for Cl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cl::Finite(x) => write!(f, "{x}"),
            Cl::Inf => f.write_str("inf"),
        }
    }
}

/// Bookkeeping for one known, not yet delivered message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quadruplet {
    pub msg: AppMessage,
    pub sd: ProcessId,
    pub sn: SeqNum,
    /// `cl[f]`: the local date at which `p_f` forwarded the message.
    pub cl: Vec<Cl>,
}

impl Quadruplet {
    pub fn id(&self) -> MessageId {
        MessageId::new(self.sd, self.sn)
    }

    /// Number of processes known to have forwarded the message.
    pub fn forwarders(&self) -> usize {
        self.cl.iter().filter(|c| c.is_finite()).count()
    }
}

/// The FORWARD protocol message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardMsg {
    pub m: AppMessage,
    pub sd: ProcessId,
    pub sn_sd: SeqNum,
    pub f: ProcessId,
    pub sn_f: SeqNum,
}

impl Labeled for ForwardMsg {
    fn label(&self) -> PacketLabel {
        PacketLabel::Forward
    }
    fn msg(&self) -> Option<MessageId> {
        Some(self.m.id)
    }
    fn sn_f(&self) -> Option<SeqNum> {
        Some(self.sn_f)
    }
}

/// True when `q` must wait for `other`: a strict majority has not forwarded
/// `q` strictly before `other`.
pub fn is_blocked_by(q: &Quadruplet, other: &Quadruplet, n: usize) -> bool {
    let earlier = q.cl.iter().zip(&other.cl).filter(|(a, b)| a < b).count();
    2 * earlier <= n
}

/// Removes from `to_deliver` every quadruplet blocked by one outside it,
/// repeating until nothing changes. Removal only enlarges the blocking side,
/// so the result does not depend on which violator goes first.
pub fn fixpoint_purge(
    mut to_deliver: BTreeSet<MessageId>,
    buffer: &BTreeMap<MessageId, Quadruplet>,
    n: usize,
) -> BTreeSet<MessageId> {
    loop {
        let victim = to_deliver.iter().copied().find(|id| {
            buffer
                .iter()
                .filter(|(other, _)| !to_deliver.contains(other))
                .any(|(_, q2)| is_blocked_by(&buffer[id], q2, n))
        });
        match victim {
            Some(id) => {
                to_deliver.remove(&id);
            }
            None => return to_deliver,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScdAction {
    FifoBroadcast(ForwardMsg),
    Deliver(MessageSet),
    /// A pending broadcast's wait condition holds.
    Complete { op_id: OpId, id: MessageId },
}

#[derive(Clone, Debug)]
pub struct ScdProcess {
    me: ProcessId,
    n: usize,
    sn: SeqNum,
    /// Greatest delivered date per sender; `None` until the first delivery.
    clock: Vec<Option<SeqNum>>,
    buffer: BTreeMap<MessageId, Quadruplet>,
    pending: Vec<(OpId, MessageId)>,
}

impl ScdProcess {
    pub fn new(me: ProcessId, n: usize) -> Self {
        ScdProcess { me, n, sn: 0, clock: vec![None; n], buffer: BTreeMap::new(), pending: Vec::new() }
    }

    pub fn sn(&self) -> SeqNum {
        self.sn
    }

    pub fn clock(&self) -> &[Option<SeqNum>] {
        &self.clock
    }

    pub fn buffer(&self) -> &BTreeMap<MessageId, Quadruplet> {
        &self.buffer
    }

    pub fn pending(&self) -> &[(OpId, MessageId)] {
        &self.pending
    }

    fn is_stale(&self, sd: ProcessId, sn: SeqNum) -> bool {
        self.clock[sd.slot()].is_some_and(|c| sn <= c)
    }

    /// Whether this process has already fifo-broadcast its own FORWARD for `id`.
    pub fn covers(&self, id: MessageId) -> bool {
        self.buffer.contains_key(&id) || self.is_stale(id.sender, id.sn)
    }

    /// Starts broadcasting `payload`; the new message is `<me, sn>`. The FORWARD
    /// to itself is handled in place.
    pub fn broadcast(&mut self, op_id: OpId, payload: Payload) -> (MessageId, Vec<ScdAction>) {
        let id = MessageId::new(self.me, self.sn);
        self.pending.push((op_id, id));
        let fm = ForwardMsg {
            m: AppMessage::new(id, payload),
            sd: self.me,
            sn_sd: self.sn,
            f: self.me,
            sn_f: self.sn,
        };
        (id, self.on_forward(fm))
    }

    /// Handles a fifo-delivered FORWARD, then tries to deliver.
    pub fn on_forward(&mut self, fm: ForwardMsg) -> Vec<ScdAction> {
        let mut actions = Vec::new();
        self.forward(fm, &mut actions);
        if let Some(set) = self.try_deliver() {
            actions.push(ScdAction::Deliver(set));
        }
        if !self.pending.is_empty() && !self.buffer.values().any(|q| q.sd == self.me) {
            for (op_id, id) in self.pending.drain(..) {
                actions.push(ScdAction::Complete { op_id, id });
            }
        }
        actions
    }

    fn forward(&mut self, fm: ForwardMsg, actions: &mut Vec<ScdAction>) {
        debug_assert_eq!(fm.m.id, MessageId::new(fm.sd, fm.sn_sd));
        if self.is_stale(fm.sd, fm.sn_sd) {
            return;
        }
        let id = MessageId::new(fm.sd, fm.sn_sd);
        if let Some(q) = self.buffer.get_mut(&id) {
            q.cl[fm.f.slot()] = Cl::Finite(fm.sn_f);
            return;
        }
        let mut cl = vec![Cl::Inf; self.n];
        cl[fm.f.slot()] = Cl::Finite(fm.sn_f);
        self.buffer.insert(id, Quadruplet { msg: fm.m.clone(), sd: fm.sd, sn: fm.sn_sd, cl });
        actions.push(ScdAction::FifoBroadcast(ForwardMsg {
            m: fm.m,
            sd: fm.sd,
            sn_sd: fm.sn_sd,
            f: self.me,
            sn_f: self.sn,
        }));
        self.sn += 1;
    }

    /// Delivers every majority-forwarded message no outside message must precede.
    pub fn try_deliver(&mut self) -> Option<MessageSet> {
        let candidates: BTreeSet<MessageId> = self
            .buffer
            .iter()
            .filter(|(_, q)| 2 * q.forwarders() > self.n)
            .map(|(id, _)| *id)
            .collect();
        let to_deliver = fixpoint_purge(candidates, &self.buffer, self.n);
        if to_deliver.is_empty() {
            return None;
        }
        let mut set = MessageSet::new();
        for id in to_deliver {
            let q = self.buffer.remove(&id).expect("purge returns buffered ids");
            let c = &mut self.clock[q.sd.slot()];
            *c = Some(c.map_or(q.sn, |x| x.max(q.sn)));
            set.insert(q.msg);
        }
        Some(set)
    }
}

pub type ScdPacket = FifoPacket<ForwardMsg>;

/// What the broadcast layer reports to the layer above it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScdUpcall {
    Deliver(MessageSet),
    BroadcastDone { op_id: OpId, id: MessageId },
}

/// The full message-passing broadcast service of one process: FIFO layer,
/// state machine and trace logging.
#[derive(Clone, Debug)]
pub struct MpScd {
    fifo: FifoBroadcast<ForwardMsg>,
    scd: ScdProcess,
}

impl MpScd {
    pub fn new(me: ProcessId, n: usize, relay: RelayMode) -> Self {
        MpScd { fifo: FifoBroadcast::new(me, n, relay), scd: ScdProcess::new(me, n) }
    }

    pub fn state(&self) -> &ScdProcess {
        &self.scd
    }

    /// Invokes a broadcast under the caller-chosen `op_id`.
    pub fn broadcast(
        &mut self,
        op_id: OpId,
        payload: Payload,
        ctx: &mut Ctx<'_, ScdPacket>,
    ) -> (MessageId, Vec<ScdUpcall>) {
        let id = MessageId::new(ctx.me(), self.scd.sn());
        ctx.log_invoke(Layer::Scd, op_id, Operation::Broadcast { id, payload: payload.clone() });
        let (got, actions) = self.scd.broadcast(op_id, payload);
        debug_assert_eq!(got, id);
        let mut up = Vec::new();
        self.apply(actions, ctx, &mut up);
        (id, up)
    }

    pub fn on_packet(&mut self, packet: ScdPacket, ctx: &mut Ctx<'_, ScdPacket>) -> Vec<ScdUpcall> {
        let mut up = Vec::new();
        self.fifo.receive(packet, ctx);
        while let Some(d) = self.fifo.next_delivery(ctx) {
            let id = d.payload.m.id;
            let actions = self.scd.on_forward(d.payload.clone());
            self.apply(actions, ctx, &mut up);
            if self.fifo.mode() == RelayMode::SuppressCovered && !self.scd.covers(id) {
                self.fifo.relay(&d, ctx);
            }
        }
        up
    }

    fn apply(&mut self, actions: Vec<ScdAction>, ctx: &mut Ctx<'_, ScdPacket>, up: &mut Vec<ScdUpcall>) {
        for a in actions {
            match a {
                ScdAction::FifoBroadcast(fm) => self.fifo.broadcast(fm, ctx),
                ScdAction::Deliver(set) => {
                    ctx.log(EventBody::ScdDeliver { layer: Layer::Scd, set: set.clone() });
                    up.push(ScdUpcall::Deliver(set));
                }
                ScdAction::Complete { op_id, id } => {
                    ctx.log_response(Layer::Scd, op_id, OpResult::Ack);
                    up.push(ScdUpcall::BroadcastDone { op_id, id });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> ProcessId {
        ProcessId::new(i)
    }

    fn msg(s: u32, sn: u64) -> AppMessage {
        AppMessage::new(MessageId::new(p(s), sn), Payload::data(""))
    }

    fn fwd(s: u32, sn: u64, f: u32, sn_f: u64) -> ForwardMsg {
        ForwardMsg { m: msg(s, sn), sd: p(s), sn_sd: sn, f: p(f), sn_f }
    }

    fn quad(s: u32, sn: u64, cl: &[Cl]) -> Quadruplet {
        Quadruplet { msg: msg(s, sn), sd: p(s), sn, cl: cl.to_vec() }
    }

    use Cl::{Finite as F, Inf};

    #[test]
    fn single_process_delivers_own_message_at_once() {
        let mut s = ScdProcess::new(p(1), 1);
        let (id, acts) = s.broadcast(7, Payload::data("x"));
        assert_eq!(id, MessageId::new(p(1), 0));
        assert!(matches!(acts[0], ScdAction::FifoBroadcast(_)));
        assert!(matches!(&acts[1], ScdAction::Deliver(set) if set.len() == 1 && set.contains(id)));
        assert_eq!(acts[2], ScdAction::Complete { op_id: 7, id });
    }

    #[test]
    fn first_receipt_creates_quadruplet_and_forwards() {
        let mut s = ScdProcess::new(p(2), 3);
        let acts = s.on_forward(fwd(1, 0, 1, 0));
        assert_eq!(acts, vec![ScdAction::FifoBroadcast(fwd(1, 0, 2, 0))]);
        let q = &s.buffer()[&MessageId::new(p(1), 0)];
        assert_eq!(q.cl, vec![F(0), Inf, Inf]);
        assert_eq!(s.sn(), 1);
    }

    #[test]
    fn second_receipt_sets_the_forwarder_entry() {
        let mut s = ScdProcess::new(p(3), 5);
        s.on_forward(fwd(1, 0, 1, 0));
        let acts = s.on_forward(fwd(1, 0, 2, 4));
        assert!(acts.is_empty());
        assert_eq!(s.buffer()[&MessageId::new(p(1), 0)].cl, vec![F(0), F(4), Inf, Inf, Inf]);
        assert_eq!(s.sn(), 1);
    }

    #[test]
    fn stale_forward_leaves_state_unchanged() {
        let mut s = ScdProcess::new(p(1), 1);
        s.broadcast(1, Payload::data(""));
        let before = (s.sn(), s.clock().to_vec(), s.buffer().clone());
        assert!(s.on_forward(fwd(1, 0, 1, 0)).is_empty());
        assert_eq!(before, (s.sn(), s.clock().to_vec(), s.buffer().clone()));
    }

    #[test]
    fn empty_buffer_delivers_nothing() {
        assert_eq!(ScdProcess::new(p(1), 3).try_deliver(), None);
    }

    /// p3 of three hears m from p1, forwards it, then hears p2's forward:
    /// two forwarders out of three, nothing else buffered, so a singleton.
    #[test]
    fn majority_seen_message_is_delivered_alone() {
        let mut s = ScdProcess::new(p(3), 3);
        assert!(!s.on_forward(fwd(1, 0, 1, 0)).iter().any(|a| matches!(a, ScdAction::Deliver(_))));
        let acts = s.on_forward(fwd(1, 0, 2, 0));
        let delivered: Vec<_> = acts
            .iter()
            .filter_map(|a| match a {
                ScdAction::Deliver(set) => Some(set.ids().collect::<Vec<_>>()),
                _ => None,
            })
            .collect();
        assert_eq!(delivered, vec![vec![MessageId::new(p(1), 0)]]);
        assert_eq!(s.clock()[0], Some(0));
    }

    #[test]
    fn blocking_predicate() {
        // q forwarded earlier than q' by processes 1 and 2 only: 2*2 > 3, not blocked.
        let q = quad(1, 0, &[F(0), F(0), Inf]);
        let q2 = quad(2, 0, &[F(1), F(1), F(0)]);
        assert!(!is_blocked_by(&q, &q2, 3));
        // q' forwarded earlier by 2 and 3: q is earlier only at 1.
        let q3 = quad(3, 0, &[F(1), F(0), F(0)]);
        assert!(is_blocked_by(&q, &q3, 3));
    }

    #[test]
    fn purge_without_violations_is_identity() {
        let mut buf = BTreeMap::new();
        let q = quad(1, 0, &[F(0), F(0), Inf]);
        buf.insert(q.id(), q.clone());
        let td: BTreeSet<_> = [q.id()].into();
        assert_eq!(fixpoint_purge(td.clone(), &buf, 3), td);
    }

    #[test]
    fn purge_removes_single_violator() {
        let mut buf = BTreeMap::new();
        let q = quad(1, 0, &[F(1), F(1), Inf]);
        let q2 = quad(2, 0, &[F(0), F(0), Inf]);
        buf.insert(q.id(), q.clone());
        buf.insert(q2.id(), q2.clone());
        // q2 is outside to_deliver and was forwarded first everywhere.
        let td: BTreeSet<_> = [q.id()].into();
        assert!(fixpoint_purge(td, &buf, 3).is_empty());
    }

    #[test]
    fn older_date_from_same_sender_is_stale_after_delivery() {
        let mut s = ScdProcess::new(p(2), 1);
        // n = 1: every forward is a majority.
        let acts = s.on_forward(fwd(1, 5, 1, 5));
        assert!(acts.iter().any(|a| matches!(a, ScdAction::Deliver(_))));
        s.on_forward(fwd(1, 3, 1, 3));
        assert_eq!(s.clock()[0], Some(5));
    }
}
