//! Simulated processes for each [`StackKind`] and the [`run`] entry point.

use std::collections::VecDeque;

use rand::Rng;

use crate::fifo::{FifoBroadcast, FifoPacket};
use crate::objects::{
    Consistency, CounterReplica, LatticeReplica, Replica, ReplicaEffect, ScCounterReplica, SnapshotReplica,
};
use crate::scd::{MpScd, ScdPacket, ScdUpcall};
use crate::shm::{ShmAction, ShmReply, ShmRequest, ShmScd};
use crate::sim::{simulate, Command, ConfigError, Ctx, Node, RunOutput, SimConfig, StackKind, Timer, Workload};
use crate::trace::{EventBody, Layer, OpId, OpResult, Operation, ShmObject, Time};
use crate::types::{AppMessage, MessageId, Payload, ProcessId, RegValue};

/// Client operation a command stands for.
pub fn operation_of(command: &Command) -> Operation {
    match command {
        Command::Broadcast { .. } => unreachable!("broadcasts are logged with their message id"),
        Command::Write { reg, value } => Operation::Write { reg: *reg, value: RegValue::Int(*value) },
        Command::Snapshot => Operation::Snapshot,
        Command::Inc => Operation::Increase,
        Command::Dec => Operation::Decrease,
        Command::Read => Operation::Read,
        Command::Propose { value } => Operation::Propose { value: value.clone() },
    }
}

/// Rejects commands the configured stack does not offer.
pub fn validate_workload(config: &SimConfig, workload: &Workload) -> Result<(), ConfigError> {
    workload.validate(config.n)?;
    let mut proposed = vec![false; config.n];
    for (index, e) in workload.entries.iter().enumerate() {
        let bad = |reason: String| Err(ConfigError::Workload { index, reason });
        let ok = match (&e.command, config.stack) {
            (Command::Broadcast { .. }, StackKind::Fifo | StackKind::Scd | StackKind::ShmScd | StackKind::ShmScdRoundtrip) => true,
            (Command::Write { reg, .. }, StackKind::Snapshot | StackKind::SnapshotSc) => {
                if *reg >= config.registers() {
                    return bad(format!("register {reg} outside 0..{}", config.registers()));
                }
                true
            }
            (Command::Snapshot, StackKind::Snapshot | StackKind::SnapshotSc) => true,
            (Command::Inc | Command::Dec | Command::Read, StackKind::Counter | StackKind::CounterSc) => true,
            (Command::Propose { .. }, StackKind::Lattice) => {
                if std::mem::replace(&mut proposed[e.proc.slot()], true) {
                    return bad(format!("{} proposes twice", e.proc));
                }
                true
            }
            _ => false,
        };
        if !ok {
            return bad(format!("{:?} is not an operation of the {:?} stack", e.command, config.stack));
        }
    }
    Ok(())
}

/// Validates `config` and `workload`, then simulates the configured stack.
pub fn run(config: &SimConfig, workload: &Workload) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    validate_workload(config, workload)?;
    let procs = ProcessId::all(config.n);
    let m = config.registers();
    Ok(match config.stack {
        StackKind::Fifo => simulate(config, workload, procs.map(|p| FifoNode::new(p, config)).collect()),
        StackKind::Scd => simulate(config, workload, procs.map(|p| ScdNode::new(p, config)).collect()),
        StackKind::Snapshot => simulate(
            config,
            workload,
            procs.map(|p| ObjectNode::new(p, config, SnapshotReplica::with_int_registers(p, Consistency::Atomic, m))).collect(),
        ),
        StackKind::SnapshotSc => simulate(
            config,
            workload,
            procs
                .map(|p| ObjectNode::new(p, config, SnapshotReplica::with_int_registers(p, Consistency::Sequential, m)))
                .collect(),
        ),
        StackKind::Counter => {
            simulate(config, workload, procs.map(|p| ObjectNode::new(p, config, CounterReplica::new(p))).collect())
        }
        StackKind::CounterSc => {
            simulate(config, workload, procs.map(|p| ObjectNode::new(p, config, ScCounterReplica::new(p))).collect())
        }
        StackKind::Lattice => {
            simulate(config, workload, procs.map(|p| ObjectNode::new(p, config, LatticeReplica::new(p))).collect())
        }
        StackKind::ShmScd => simulate(config, workload, procs.map(|p| ShmNode::new(p, config)).collect()),
        StackKind::ShmScdRoundtrip => {
            simulate(config, workload, procs.map(|p| RoundTripNode::new(p, config)).collect())
        }
    })
}

fn data_of(command: &Command) -> Payload {
    match command {
        Command::Broadcast { data } => Payload::data(data.clone()),
        other => panic!("{other:?} reached a broadcast-only process"),
    }
}

/// Bare FIFO broadcast; each broadcast returns immediately.
pub struct FifoNode {
    fifo: FifoBroadcast<AppMessage>,
    next_sn: u64,
}

impl FifoNode {
    pub fn new(me: ProcessId, config: &SimConfig) -> Self {
        FifoNode { fifo: FifoBroadcast::new(me, config.n, config.relay), next_sn: 0 }
    }
}

impl Node for FifoNode {
    type Packet = FifoPacket<AppMessage>;

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, Self::Packet>) {
        let id = MessageId::new(ctx.me(), self.next_sn);
        self.next_sn += 1;
        let payload = data_of(command);
        ctx.log_invoke(Layer::Fifo, op_id, Operation::Broadcast { id, payload: payload.clone() });
        self.fifo.broadcast(AppMessage::new(id, payload), ctx);
        ctx.respond_client(Layer::Fifo, op_id, OpResult::Ack);
    }

    fn on_packet(&mut self, _from: ProcessId, packet: Self::Packet, ctx: &mut Ctx<'_, Self::Packet>) {
        self.fifo.receive(packet, ctx);
        while let Some(d) = self.fifo.next_delivery(ctx) {
            if self.fifo.mode() == crate::sim::RelayMode::SuppressCovered {
                self.fifo.relay(&d, ctx);
            }
        }
    }
}

/// Message-passing set-constrained delivery broadcast exposed directly.
pub struct ScdNode {
    scd: MpScd,
}

impl ScdNode {
    pub fn new(me: ProcessId, config: &SimConfig) -> Self {
        ScdNode { scd: MpScd::new(me, config.n, config.relay) }
    }

    fn upcalls(ups: Vec<ScdUpcall>, ctx: &mut Ctx<'_, ScdPacket>) {
        for u in ups {
            if let ScdUpcall::BroadcastDone { op_id, .. } = u {
                ctx.release_client(op_id);
            }
        }
    }
}

impl Node for ScdNode {
    type Packet = ScdPacket;

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, ScdPacket>) {
        let (_, ups) = self.scd.broadcast(op_id, data_of(command), ctx);
        Self::upcalls(ups, ctx);
    }

    fn on_packet(&mut self, _from: ProcessId, packet: ScdPacket, ctx: &mut Ctx<'_, ScdPacket>) {
        let ups = self.scd.on_packet(packet, ctx);
        Self::upcalls(ups, ctx);
    }
}

/// Hosts a [`Replica`] on the message-passing broadcast.
pub struct ObjectNode<R> {
    scd: MpScd,
    replica: R,
    client: Option<OpId>,
}

impl<R: Replica> ObjectNode<R> {
    pub fn new(me: ProcessId, config: &SimConfig, replica: R) -> Self {
        ObjectNode { scd: MpScd::new(me, config.n, config.relay), replica, client: None }
    }

    pub fn replica(&self) -> &R {
        &self.replica
    }

    fn effects(&mut self, effects: Vec<ReplicaEffect>, ctx: &mut Ctx<'_, ScdPacket>) {
        let mut work: VecDeque<ReplicaEffect> = effects.into();
        while let Some(e) = work.pop_front() {
            match e {
                ReplicaEffect::Broadcast(payload) => {
                    let op = ctx.next_op_id();
                    let (_, ups) = self.scd.broadcast(op, payload, ctx);
                    for u in ups {
                        if let ScdUpcall::Deliver(set) = u {
                            work.extend(self.replica.on_deliver(&set));
                        }
                    }
                }
                ReplicaEffect::Respond(result) => {
                    let op = self.client.take().expect("a response needs a pending client operation");
                    ctx.respond_client(Layer::Object, op, result);
                }
            }
        }
    }
}

impl<R: Replica> Node for ObjectNode<R> {
    type Packet = ScdPacket;

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, ScdPacket>) {
        let op = operation_of(command);
        ctx.log_invoke(Layer::Object, op_id, op.clone());
        self.client = Some(op_id);
        let effects = self.replica.invoke(&op).expect("workload was validated against the stack");
        self.effects(effects, ctx);
    }

    fn on_packet(&mut self, _from: ProcessId, packet: ScdPacket, ctx: &mut Ctx<'_, ScdPacket>) {
        let ups = self.scd.on_packet(packet, ctx);
        let mut effects = Vec::new();
        for u in ups {
            if let ScdUpcall::Deliver(set) = u {
                effects.extend(self.replica.on_deliver(&set));
            }
        }
        self.effects(effects, ctx);
    }
}

/// Background-tick pacing: the gap doubles after each idle iteration, up to
/// eight times the base, and resets after useful work.
#[derive(Clone, Debug)]
struct TickPacer {
    enabled: bool,
    base: Time,
    idle: u32,
    /// Progress mark when the current iteration was requested.
    mark: u64,
}

impl TickPacer {
    fn new(config: &SimConfig) -> Self {
        TickPacer { enabled: config.ticks, base: config.tick_gap.max(1), idle: 0, mark: 0 }
    }

    fn next_gap<P: Clone>(&mut self, did_work: bool, ctx: &mut Ctx<'_, P>) -> Time {
        self.idle = if did_work { 0 } else { (self.idle + 1).min(3) };
        let hi = self.base << self.idle;
        ctx.rng().gen_range(hi / 2 + 1..=hi)
    }

    fn started<P: Clone>(&mut self, ctx: &Ctx<'_, P>) {
        self.mark = ctx.progress_mark();
    }

    fn schedule<P: Clone>(&mut self, did_work: bool, ctx: &mut Ctx<'_, P>) {
        if !did_work {
            ctx.settle(self.mark);
        }
        if self.enabled {
            let gap = self.next_gap(did_work, ctx);
            ctx.schedule(gap, Timer::Tick);
        }
    }
}

fn log_shm(request: &ShmRequest, reply: &ShmReply, ctx: &mut Ctx<'_, impl Clone>) {
    match (request, reply) {
        (ShmRequest::Write { object, value }, ShmReply::Written) => {
            ctx.log(EventBody::ShmWrite { object: *object, value: value.clone() })
        }
        (ShmRequest::Snapshot { object }, ShmReply::View(view)) => {
            ctx.log(EventBody::ShmSnapshot { object: *object, view: view.clone() })
        }
        _ => unreachable!("reply kind follows request kind"),
    }
}

/// Handles the non-request actions of the shared-memory construction.
fn shm_outcome<P: Clone>(action: ShmAction, pacer: &mut TickPacer, ctx: &mut Ctx<'_, P>) {
    match action {
        ShmAction::Deliver(set) => ctx.log(EventBody::ScdDeliver { layer: Layer::ShmScd, set }),
        ShmAction::Complete { op_id, .. } => ctx.respond_client(Layer::ShmScd, op_id, OpResult::Ack),
        ShmAction::TickDone { did_work } => pacer.schedule(did_work, ctx),
        ShmAction::Request(_) => unreachable!("requests are dispatched by the caller"),
    }
}

/// The shared-memory construction over the atomic snapshot oracle. Each
/// requested operation takes effect atomically after a seed-chosen gap.
pub struct ShmNode {
    machine: ShmScd,
    request: Option<ShmRequest>,
    pacer: TickPacer,
}

impl ShmNode {
    pub fn new(me: ProcessId, config: &SimConfig) -> Self {
        ShmNode { machine: ShmScd::new(me, config.n), request: None, pacer: TickPacer::new(config) }
    }

    fn actions(&mut self, actions: Vec<ShmAction>, ctx: &mut Ctx<'_, ()>) {
        for a in actions {
            match a {
                ShmAction::Request(r) => {
                    debug_assert!(self.request.is_none());
                    self.request = Some(r);
                    let step = ctx.config().shm_step.max(1);
                    let gap = ctx.rng().gen_range(1..=step);
                    ctx.schedule(gap, Timer::ShmApply);
                }
                other => shm_outcome(other, &mut self.pacer, ctx),
            }
        }
    }
}

impl Node for ShmNode {
    type Packet = ();

    fn start(&mut self, ctx: &mut Ctx<'_, ()>) {
        self.pacer.schedule(true, ctx);
    }

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, ()>) {
        let payload = data_of(command);
        let id = self.machine.next_id();
        ctx.log_invoke(Layer::ShmScd, op_id, Operation::Broadcast { id, payload: payload.clone() });
        let (_, actions) = self.machine.broadcast(op_id, payload);
        self.actions(actions, ctx);
    }

    fn on_packet(&mut self, _from: ProcessId, _packet: (), _ctx: &mut Ctx<'_, ()>) {}

    fn on_timer(&mut self, timer: Timer, ctx: &mut Ctx<'_, ()>) {
        match timer {
            Timer::Tick => {
                self.pacer.started(ctx);
                let actions = self.machine.tick();
                self.actions(actions, ctx);
            }
            Timer::ShmApply => {
                let request = self.request.take().expect("apply timer without a request");
                let me = ctx.me();
                let reply = ctx.shm().apply(me, &request);
                log_shm(&request, &reply, ctx);
                let actions = self.machine.on_reply(reply);
                self.actions(actions, ctx);
            }
        }
    }
}

/// The shared-memory construction whose `SENT` and `SETSEQ` objects are one
/// atomic snapshot object of `2n` registers, itself running on the
/// message-passing broadcast. `SENT[j]` is register `j`, `SETSEQ[j]` is
/// register `n + j`.
pub struct RoundTripNode {
    n: usize,
    scd: MpScd,
    snapshot: SnapshotReplica,
    machine: ShmScd,
    inner: Option<(OpId, ShmRequest)>,
    pacer: TickPacer,
}

enum Work {
    Shm(ShmAction),
    Replica(ReplicaEffect),
}

impl RoundTripNode {
    pub fn new(me: ProcessId, config: &SimConfig) -> Self {
        let n = config.n;
        let mut initial = vec![RegValue::Messages(Default::default()); n];
        initial.extend(vec![RegValue::SetSeq(Vec::new()); n]);
        RoundTripNode {
            n,
            scd: MpScd::new(me, n, config.relay),
            snapshot: SnapshotReplica::new(me, Consistency::Atomic, initial),
            machine: ShmScd::new(me, n),
            inner: None,
            pacer: TickPacer::new(config),
        }
    }

    fn register(&self, me: ProcessId, object: ShmObject) -> usize {
        match object {
            ShmObject::Sent => me.slot(),
            ShmObject::SetSeq => self.n + me.slot(),
        }
    }

    fn run(&mut self, work: Vec<Work>, ctx: &mut Ctx<'_, ScdPacket>) {
        let mut queue: VecDeque<Work> = work.into();
        while let Some(w) = queue.pop_front() {
            match w {
                Work::Shm(ShmAction::Request(request)) => {
                    let op = match &request {
                        ShmRequest::Write { object, value } => {
                            Operation::Write { reg: self.register(ctx.me(), *object), value: value.clone() }
                        }
                        ShmRequest::Snapshot { .. } => Operation::Snapshot,
                    };
                    let op_id = ctx.next_op_id();
                    ctx.log_invoke(Layer::Object, op_id, op.clone());
                    self.inner = Some((op_id, request));
                    let effects = self.snapshot.invoke(&op).expect("one inner operation at a time");
                    queue.extend(effects.into_iter().map(Work::Replica));
                }
                Work::Shm(other) => shm_outcome(other, &mut self.pacer, ctx),
                Work::Replica(ReplicaEffect::Broadcast(payload)) => {
                    let op = ctx.next_op_id();
                    let (_, ups) = self.scd.broadcast(op, payload, ctx);
                    for u in ups {
                        if let ScdUpcall::Deliver(set) = u {
                            queue.extend(self.snapshot.on_deliver(&set).into_iter().map(Work::Replica));
                        }
                    }
                }
                Work::Replica(ReplicaEffect::Respond(result)) => {
                    let (op_id, request) = self.inner.take().expect("inner response without request");
                    ctx.log_response(Layer::Object, op_id, result.clone());
                    let reply = match (&request, result) {
                        (ShmRequest::Write { .. }, OpResult::Ack) => ShmReply::Written,
                        (ShmRequest::Snapshot { object }, OpResult::Snapshot { values }) => {
                            let lo = self.register(ProcessId::from_slot(0), *object);
                            ShmReply::View(values[lo..lo + self.n].to_vec())
                        }
                        (r, res) => unreachable!("{res:?} does not answer {r:?}"),
                    };
                    log_shm(&request, &reply, ctx);
                    queue.extend(self.machine.on_reply(reply).into_iter().map(Work::Shm));
                }
            }
        }
    }
}

impl Node for RoundTripNode {
    type Packet = ScdPacket;

    fn start(&mut self, ctx: &mut Ctx<'_, ScdPacket>) {
        self.pacer.schedule(true, ctx);
    }

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, ScdPacket>) {
        let payload = data_of(command);
        let id = self.machine.next_id();
        ctx.log_invoke(Layer::ShmScd, op_id, Operation::Broadcast { id, payload: payload.clone() });
        let (_, actions) = self.machine.broadcast(op_id, payload);
        self.run(actions.into_iter().map(Work::Shm).collect(), ctx);
    }

    fn on_packet(&mut self, _from: ProcessId, packet: ScdPacket, ctx: &mut Ctx<'_, ScdPacket>) {
        let ups = self.scd.on_packet(packet, ctx);
        let mut work = Vec::new();
        for u in ups {
            if let ScdUpcall::Deliver(set) = u {
                work.extend(self.snapshot.on_deliver(&set).into_iter().map(Work::Replica));
            }
        }
        self.run(work, ctx);
    }

    fn on_timer(&mut self, timer: Timer, ctx: &mut Ctx<'_, ScdPacket>) {
        if timer == Timer::Tick {
            self.pacer.started(ctx);
            let actions = self.machine.tick();
            self.run(actions.into_iter().map(Work::Shm).collect(), ctx);
        }
    }
}
