//! Uniform FIFO broadcast over the simulator's point-to-point channels.
//!
//! Each broadcast carries `(origin, fsn)`. A receiver buffers out-of-order
//! arrivals per origin and hands payloads up strictly in `fsn` order, once
//! each. Uniformity comes from echo-relay: in [`RelayMode::Echo`] the first
//! receipt of a broadcast is re-sent to everybody before it can be delivered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::{Ctx, RelayMode};
use crate::trace::{EventBody, PacketInfo, PacketLabel};
use crate::types::{AppMessage, MessageId, ProcessId, SeqNum};

/// Trace metadata a payload contributes to its packets.
pub trait Labeled {
    fn label(&self) -> PacketLabel;
    fn msg(&self) -> Option<MessageId>;
    fn sn_f(&self) -> Option<SeqNum> {
        None
    }
}

impl Labeled for AppMessage {
    fn label(&self) -> PacketLabel {
        PacketLabel::Data
    }
    fn msg(&self) -> Option<MessageId> {
        Some(self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FifoPacket<M> {
    pub origin: ProcessId,
    pub fsn: u64,
    pub payload: M,
    pub relay: bool,
}

/// A payload handed up by the FIFO layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FifoDelivery<M> {
    pub origin: ProcessId,
    pub fsn: u64,
    pub payload: M,
}

#[derive(Clone, Debug)]
pub struct FifoBroadcast<M> {
    me: ProcessId,
    mode: RelayMode,
    next_send: u64,
    next_deliver: Vec<u64>,
    pending: Vec<BTreeMap<u64, M>>,
}

impl<M: Clone + Labeled> FifoBroadcast<M> {
    pub fn new(me: ProcessId, n: usize, mode: RelayMode) -> Self {
        FifoBroadcast {
            me,
            mode,
            next_send: 0,
            next_deliver: vec![0; n],
            pending: vec![BTreeMap::new(); n],
        }
    }

    pub fn mode(&self) -> RelayMode {
        self.mode
    }

    fn info(origin: ProcessId, fsn: u64, payload: &M, relay: bool) -> PacketInfo {
        PacketInfo {
            id: 0,
            label: if relay { PacketLabel::Relay } else { payload.label() },
            origin,
            fsn,
            msg: payload.msg(),
            sn_f: payload.sn_f(),
        }
    }

    /// Sends `payload` to every process, this one included.
    pub fn broadcast(&mut self, payload: M, ctx: &mut Ctx<'_, FifoPacket<M>>) {
        let fsn = self.next_send;
        self.next_send += 1;
        let info = Self::info(self.me, fsn, &payload, false);
        ctx.send_all(FifoPacket { origin: self.me, fsn, payload, relay: false }, info);
    }

    /// Re-sends a delivered payload on behalf of its origin.
    pub fn relay(&mut self, d: &FifoDelivery<M>, ctx: &mut Ctx<'_, FifoPacket<M>>) {
        let info = Self::info(d.origin, d.fsn, &d.payload, true);
        let packet = FifoPacket { origin: d.origin, fsn: d.fsn, payload: d.payload.clone(), relay: true };
        ctx.send_all(packet, info);
    }

    fn seen(&self, origin: ProcessId, fsn: u64) -> bool {
        fsn < self.next_deliver[origin.slot()] || self.pending[origin.slot()].contains_key(&fsn)
    }

    /// Accepts a packet. Duplicates are dropped; in echo mode the first copy is
    /// relayed before it becomes deliverable. Drain with [`Self::next_delivery`].
    pub fn receive(&mut self, packet: FifoPacket<M>, ctx: &mut Ctx<'_, FifoPacket<M>>) {
        if self.seen(packet.origin, packet.fsn) {
            return;
        }
        let FifoPacket { origin, fsn, payload, .. } = packet;
        if self.mode == RelayMode::Echo && origin != self.me {
            self.relay(&FifoDelivery { origin, fsn, payload: payload.clone() }, ctx);
        }
        self.pending[origin.slot()].insert(fsn, payload);
    }

    /// Next payload deliverable in FIFO order, logging its `fifo_deliver` event.
    pub fn next_delivery(&mut self, ctx: &mut Ctx<'_, FifoPacket<M>>) -> Option<FifoDelivery<M>> {
        for slot in 0..self.pending.len() {
            let want = self.next_deliver[slot];
            if let Some(payload) = self.pending[slot].remove(&want) {
                self.next_deliver[slot] += 1;
                let origin = ProcessId::from_slot(slot);
                ctx.log(EventBody::FifoDeliver { origin, fsn: want, msg: payload.msg() });
                return Some(FifoDelivery { origin, fsn: want, payload });
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, Command, Node, SimConfig, Workload};
    use crate::trace::OpId;
    use crate::types::Payload;

    struct Host {
        fifo: FifoBroadcast<AppMessage>,
        sent: u64,
    }

    impl Node for Host {
        type Packet = FifoPacket<AppMessage>;

        fn invoke(&mut self, op_id: OpId, _c: &Command, ctx: &mut Ctx<'_, Self::Packet>) {
            let id = MessageId::new(ctx.me(), self.sent);
            self.sent += 1;
            self.fifo.broadcast(AppMessage::new(id, Payload::data("")), ctx);
            ctx.release_client(op_id);
        }

        fn on_packet(&mut self, _from: ProcessId, p: Self::Packet, ctx: &mut Ctx<'_, Self::Packet>) {
            self.fifo.receive(p, ctx);
            while self.fifo.next_delivery(ctx).is_some() {}
        }
    }

    fn run(config: &SimConfig, workload: &Workload) -> crate::trace::Trace {
        let nodes = ProcessId::all(config.n)
            .map(|p| Host { fifo: FifoBroadcast::new(p, config.n, config.relay), sent: 0 })
            .collect();
        simulate(config, workload, nodes).trace
    }

    fn deliveries(trace: &crate::trace::Trace) -> Vec<(ProcessId, ProcessId, u64)> {
        trace
            .events
            .iter()
            .filter_map(|e| match e.body {
                EventBody::FifoDeliver { origin, fsn, .. } => Some((e.proc, origin, fsn)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn single_process_delivers_to_itself() {
        let c = SimConfig { n: 1, t: 0, ..SimConfig::default() };
        let mut w = Workload::default();
        w.push(0, ProcessId::new(1), Command::Broadcast { data: String::new() });
        let d = deliveries(&run(&c, &w));
        assert_eq!(d, vec![(ProcessId::new(1), ProcessId::new(1), 0)]);
    }

    #[test]
    fn no_broadcasts_no_deliveries() {
        let c = SimConfig { n: 3, ..SimConfig::default() };
        assert!(deliveries(&run(&c, &Workload::default())).is_empty());
    }

    #[test]
    fn per_sender_order_and_integrity_across_seeds() {
        for seed in 0..200 {
            let c = SimConfig {
                n: 3,
                seed,
                delay: crate::sim::DelayModel::Unbounded { mean: 5 },
                ..SimConfig::default()
            };
            let mut w = Workload::default();
            for k in 0..4 {
                w.push(k, ProcessId::new(1), Command::Broadcast { data: String::new() });
                w.push(k, ProcessId::new(2), Command::Broadcast { data: String::new() });
            }
            let d = deliveries(&run(&c, &w));
            for p in ProcessId::all(3) {
                for o in ProcessId::all(2) {
                    let seq: Vec<u64> =
                        d.iter().filter(|(q, org, _)| *q == p && *org == o).map(|x| x.2).collect();
                    assert_eq!(seq, vec![0, 1, 2, 3], "seed {seed}");
                }
            }
        }
    }
}
