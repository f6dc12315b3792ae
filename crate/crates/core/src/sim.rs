//! Deterministic discrete-event simulator of `n` crash-prone asynchronous
//! processes connected by reliable, non-FIFO point-to-point channels.
//!
//! A run is a pure function of its [`SimConfig`] and [`Workload`]: every random
//! choice (message delays, destination order of a send-to-all, background task
//! gaps) is drawn from a ChaCha stream seeded by `config.seed`, and simultaneous
//! events are ordered by insertion.
//!
//! Handlers execute atomically at the instant of the event that triggers them
//! (zero local processing time). A process crashes at an event boundary, or in
//! the middle of a send-to-all when its crash carries a `cut`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shm::SharedMemory;
use crate::trace::{Event, EventBody, Layer, OpId, OpResult, Operation, PacketInfo, Time, Trace};
use crate::types::ProcessId;

/// Message delay distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// Uniform in `1..=delta`.
    Bounded { delta: Time },
    /// Exponential with the given mean and an occasional 20x straggler,
    /// truncated at `200 * mean`.
    Unbounded { mean: Time },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Bounded { delta: 10 }
    }
}

impl DelayModel {
    /// Upper bound on a single transfer delay, when there is one.
    pub fn delta(&self) -> Option<Time> {
        match self {
            DelayModel::Bounded { delta } => Some(*delta),
            DelayModel::Unbounded { .. } => None,
        }
    }
}

/// Draws one transfer delay. Bounded samples lie in `(0, delta]`; unbounded
/// samples are finite and positive.
pub fn sample_delay<R: Rng>(rng: &mut R, model: &DelayModel) -> Time {
    match *model {
        DelayModel::Bounded { delta } => rng.gen_range(1..=delta.max(1)),
        DelayModel::Unbounded { mean } => {
            let mean = mean.max(1) as f64;
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let mut d = -u.ln() * mean;
            if rng.gen_ratio(1, 20) {
                d *= 20.0;
            }
            (d.ceil() as Time).clamp(1, (200.0 * mean) as Time)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashSpec {
    pub proc: ProcessId,
    pub time: Time,
    /// When set, the process crashes inside its first send-to-all issued at or
    /// after `time`, after reaching only the first `cut` destinations of a
    /// seed-determined permutation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
}

/// How the FIFO layer re-broadcasts payloads it receives from others.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayMode {
    /// Echo every first receipt to all processes before delivering it.
    #[default]
    Echo,
    /// Skip the echo when the upper layer has already fifo-broadcast its own
    /// FORWARD for the same application message.
    SuppressCovered,
}

/// Which protocol stack every simulated process runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackKind {
    /// Bare uniform FIFO broadcast.
    Fifo,
    /// Message-passing set-constrained delivery broadcast.
    #[default]
    Scd,
    /// Atomic MWMR snapshot over `Scd`.
    Snapshot,
    /// Sequentially consistent snapshot (no SYNC rounds) over `Scd`.
    SnapshotSc,
    /// Atomic counter over `Scd`.
    Counter,
    /// Sequentially consistent counter with fast updates over `Scd`.
    CounterSc,
    /// Lattice agreement over `Scd`.
    Lattice,
    /// Set-constrained delivery broadcast over atomic snapshot objects.
    ShmScd,
    /// `ShmScd` whose snapshot objects are themselves built by `Snapshot` over `Scd`.
    ShmScdRoundtrip,
}

impl StackKind {
    /// Stacks whose processes never touch the network.
    pub fn shared_memory_only(self) -> bool {
        matches!(self, StackKind::ShmScd)
    }

    /// Layer at which the stack's set-constrained deliveries are observed.
    pub fn broadcast_layer(self) -> Layer {
        match self {
            StackKind::Fifo => Layer::Fifo,
            StackKind::ShmScd | StackKind::ShmScdRoundtrip => Layer::ShmScd,
            _ => Layer::Scd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub delay: DelayModel,
    pub crashes: Vec<CrashSpec>,
    pub max_time: Time,
    pub stack: StackKind,
    pub relay: RelayMode,
    /// Register count of snapshot stacks; defaults to `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registers: Option<usize>,
    /// Background task of the shared-memory construction.
    pub ticks: bool,
    pub tick_gap: Time,
    /// Upper bound on the gap before a requested shared-memory operation takes effect.
    pub shm_step: Time,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 3,
            t: 1,
            seed: 0,
            delay: DelayModel::default(),
            crashes: Vec::new(),
            max_time: 1_000_000,
            stack: StackKind::Scd,
            relay: RelayMode::Echo,
            registers: None,
            ticks: true,
            tick_gap: 25,
            shm_step: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n must be at least 1")]
    NoProcesses,
    #[error("{count} crashes scheduled but t = {t}")]
    TooManyCrashes { count: usize, t: usize },
    #[error("{0} is outside 1..=n")]
    UnknownProcess(ProcessId),
    #[error("{0} is scheduled to crash twice")]
    DuplicateCrash(ProcessId),
    #[error("bounded delay needs delta > 0")]
    ZeroDelta,
    #[error("register count must be at least 1")]
    NoRegisters,
    #[error("workload entry {index}: {reason}")]
    Workload { index: usize, reason: String },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.crashes.len() > self.t {
            return Err(ConfigError::TooManyCrashes { count: self.crashes.len(), t: self.t });
        }
        let mut seen = BTreeSet::new();
        for c in &self.crashes {
            if c.proc.slot() >= self.n {
                return Err(ConfigError::UnknownProcess(c.proc));
            }
            if !seen.insert(c.proc) {
                return Err(ConfigError::DuplicateCrash(c.proc));
            }
        }
        if self.delay == (DelayModel::Bounded { delta: 0 }) {
            return Err(ConfigError::ZeroDelta);
        }
        if self.registers == Some(0) {
            return Err(ConfigError::NoRegisters);
        }
        Ok(())
    }

    pub fn registers(&self) -> usize {
        self.registers.unwrap_or(self.n)
    }

    /// True when the crash bound leaves no correct majority.
    pub fn beyond_majority_resilience(&self) -> bool {
        2 * self.t >= self.n
    }
}

/// A client-level operation in a workload script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Broadcast { data: String },
    Write { reg: usize, value: i64 },
    Snapshot,
    Inc,
    Dec,
    Read,
    Propose { value: BTreeSet<i64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    /// Earliest invocation time. A process runs one client operation at a
    /// time, so an entry whose predecessor is still pending waits for it.
    pub time: Time,
    pub proc: ProcessId,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub entries: Vec<WorkloadEntry>,
}

impl Workload {
    pub fn new(entries: Vec<WorkloadEntry>) -> Self {
        Workload { entries }
    }

    pub fn push(&mut self, time: Time, proc: ProcessId, command: Command) {
        self.entries.push(WorkloadEntry { time, proc, command });
    }

    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        for (index, e) in self.entries.iter().enumerate() {
            if e.proc.slot() >= n {
                return Err(ConfigError::Workload { index, reason: format!("{} outside 1..={n}", e.proc) });
            }
        }
        Ok(())
    }
}

/// Local timers a node can arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timer {
    /// One iteration of a background task.
    Tick,
    /// A requested shared-memory operation takes effect.
    ShmApply,
}

/// A simulated process.
pub trait Node {
    type Packet: Clone;

    fn start(&mut self, _ctx: &mut Ctx<'_, Self::Packet>) {}

    fn invoke(&mut self, op_id: OpId, command: &Command, ctx: &mut Ctx<'_, Self::Packet>);

    fn on_packet(&mut self, from: ProcessId, packet: Self::Packet, ctx: &mut Ctx<'_, Self::Packet>);

    fn on_timer(&mut self, _timer: Timer, _ctx: &mut Ctx<'_, Self::Packet>) {}
}

enum Item<P> {
    Packet { from: ProcessId, to: ProcessId, packet: P, info: PacketInfo },
    Ready(ProcessId),
    Timer(ProcessId, Timer),
    Crash(ProcessId, Option<usize>),
}

struct Scheduled<P> {
    time: Time,
    order: u64,
    item: Item<P>,
}

impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.order) == (other.time, other.order)
    }
}
impl<P> Eq for Scheduled<P> {}
impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.order).cmp(&(other.time, other.order))
    }
}

struct World<P> {
    config: SimConfig,
    now: Time,
    seq: u64,
    order: u64,
    packets: u64,
    ops: OpId,
    queue: BinaryHeap<Reverse<Scheduled<P>>>,
    rng: ChaCha8Rng,
    events: Vec<Event>,
    crashed: Vec<bool>,
    armed_cut: Vec<Option<usize>>,
    current_op: Vec<Option<OpId>>,
    scripts: Vec<VecDeque<WorkloadEntry>>,
    dropped: Vec<(ProcessId, Command)>,
    shm: SharedMemory,
    /// Bumped whenever shared state may have changed.
    progress: u64,
    /// Per process, the `progress` value its latest idle background iteration started from.
    settled_at: Vec<Option<u64>>,
    /// Set once every live process is settled; background timers are then dropped.
    draining: bool,
}

impl<P> World<P> {
    fn schedule(&mut self, time: Time, item: Item<P>) {
        self.order += 1;
        self.queue.push(Reverse(Scheduled { time, order: self.order, item }));
    }

    fn push_event(&mut self, proc: ProcessId, body: EventBody) {
        if matches!(
            body,
            EventBody::ShmWrite { .. }
                | EventBody::ScdDeliver { layer: Layer::ShmScd, .. }
                | EventBody::Invoke { layer: Layer::ShmScd, .. }
        ) {
            self.progress += 1;
        }
        self.seq += 1;
        self.events.push(Event { time: self.now, seq: self.seq, proc, body });
    }

    fn crash_now(&mut self, proc: ProcessId, cut: Option<usize>) {
        if !self.crashed[proc.slot()] {
            self.push_event(proc, EventBody::Crash { cut });
            self.crashed[proc.slot()] = true;
            self.armed_cut[proc.slot()] = None;
            // Later scripted operations are drained into `dropped`.
            self.current_op[proc.slot()] = None;
            self.schedule_next_ready(proc);
        }
    }

    /// Every live process ran an idle background iteration that started after
    /// the last change to shared state, and no client work remains.
    fn settled(&self) -> bool {
        (0..self.config.n).all(|k| {
            self.crashed[k]
                || (self.settled_at[k] == Some(self.progress)
                    && self.current_op[k].is_none()
                    && self.scripts[k].is_empty())
        })
    }

    fn schedule_next_ready(&mut self, proc: ProcessId) {
        if let Some(next) = self.scripts[proc.slot()].front() {
            let at = next.time.max(self.now);
            self.schedule(at, Item::Ready(proc));
        }
    }
}

/// A node's handle on the simulator while one of its handlers runs.
pub struct Ctx<'a, P> {
    world: &'a mut World<P>,
    me: ProcessId,
}

impl<'a, P: Clone> Ctx<'a, P> {
    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn n(&self) -> usize {
        self.world.config.n
    }

    pub fn now(&self) -> Time {
        self.world.now
    }

    pub fn config(&self) -> &SimConfig {
        &self.world.config
    }

    /// False once this process crashed; every effect is then discarded.
    pub fn alive(&self) -> bool {
        !self.world.crashed[self.me.slot()]
    }

    pub fn log(&mut self, body: EventBody) {
        if self.alive() {
            self.world.push_event(self.me, body);
        }
    }

    pub fn log_invoke(&mut self, layer: Layer, op_id: OpId, op: Operation) {
        self.log(EventBody::Invoke { layer, op_id, op });
    }

    pub fn log_response(&mut self, layer: Layer, op_id: OpId, result: OpResult) {
        self.log(EventBody::Response { layer, op_id, result });
    }

    /// Marker to pass to [`Ctx::settle`] when the iteration started now turns out idle.
    pub fn progress_mark(&self) -> u64 {
        self.world.progress
    }

    /// Reports an idle background iteration that started at `mark`. Once all
    /// live processes are settled at the current mark, the state can no
    /// longer change and further `Tick` timers are discarded.
    pub fn settle(&mut self, mark: u64) {
        self.world.settled_at[self.me.slot()] = Some(mark);
    }

    pub fn next_op_id(&mut self) -> OpId {
        self.world.ops += 1;
        self.world.ops
    }

    /// Marks the current client operation finished so the next scripted one may start.
    pub fn release_client(&mut self, op_id: OpId) {
        if !self.alive() {
            return;
        }
        let slot = self.me.slot();
        if self.world.current_op[slot] == Some(op_id) {
            self.world.current_op[slot] = None;
            self.world.schedule_next_ready(self.me);
        }
    }

    pub fn respond_client(&mut self, layer: Layer, op_id: OpId, result: OpResult) {
        self.log_response(layer, op_id, result);
        self.release_client(op_id);
    }

    /// Point-to-point send; `info.id` is assigned here.
    pub fn send(&mut self, to: ProcessId, packet: P, mut info: PacketInfo) {
        if !self.alive() {
            return;
        }
        self.world.packets += 1;
        info.id = self.world.packets;
        self.log(EventBody::NetSend { to, packet: info.clone() });
        let delay = sample_delay(&mut self.world.rng, &self.world.config.delay);
        let at = self.world.now + delay;
        self.world.schedule(at, Item::Packet { from: self.me, to, packet, info });
    }

    /// Sends to every process, this one included, in a seed-determined order.
    /// An armed crash cut takes effect here.
    pub fn send_all(&mut self, packet: P, info: PacketInfo) {
        if !self.alive() {
            return;
        }
        let mut order: Vec<ProcessId> = ProcessId::all(self.n()).collect();
        order.shuffle(&mut self.world.rng);
        let cut = self.world.armed_cut[self.me.slot()];
        let reach = cut.unwrap_or(order.len()).min(order.len());
        for to in &order[..reach] {
            self.send(*to, packet.clone(), info.clone());
        }
        if cut.is_some() {
            self.world.crash_now(self.me, cut);
        }
    }

    pub fn schedule(&mut self, after: Time, timer: Timer) {
        if self.alive() {
            let at = self.world.now + after;
            self.world.schedule(at, Item::Timer(self.me, timer));
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.world.rng
    }

    pub fn shm(&mut self) -> &mut SharedMemory {
        &mut self.world.shm
    }
}

/// What happened besides the trace itself.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunReport {
    pub end_time: Time,
    /// The run stopped at `max_time` with events still queued.
    pub hit_horizon: bool,
    /// Client operations invoked but never answered, per process.
    pub pending_ops: Vec<(ProcessId, OpId)>,
    /// Scripted operations never invoked because an earlier one never returned.
    pub never_started: usize,
    /// Scripted operations addressed to a process that had already crashed.
    pub dropped: Vec<(ProcessId, Command)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: RunReport,
}

/// Runs `nodes` (one per process, in id order) under `config` and `workload`.
pub fn simulate<N: Node>(config: &SimConfig, workload: &Workload, mut nodes: Vec<N>) -> RunOutput {
    assert_eq!(nodes.len(), config.n, "one node per process");
    let n = config.n;
    let mut scripts: Vec<VecDeque<WorkloadEntry>> = vec![VecDeque::new(); n];
    let mut entries = workload.entries.clone();
    entries.sort_by_key(|e| e.time);
    for e in entries {
        scripts[e.proc.slot()].push_back(e);
    }
    let mut world: World<N::Packet> = World {
        config: config.clone(),
        now: 0,
        seq: 0,
        order: 0,
        packets: 0,
        ops: 0,
        queue: BinaryHeap::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        events: Vec::new(),
        crashed: vec![false; n],
        armed_cut: vec![None; n],
        current_op: vec![None; n],
        scripts,
        dropped: Vec::new(),
        shm: SharedMemory::new(n),
        progress: 0,
        settled_at: vec![None; n],
        draining: false,
    };
    for c in &config.crashes {
        let cut = if config.stack.shared_memory_only() { None } else { c.cut };
        world.schedule(c.time, Item::Crash(c.proc, cut));
    }
    for p in ProcessId::all(n) {
        world.schedule_next_ready(p);
    }
    for (slot, node) in nodes.iter_mut().enumerate() {
        let mut ctx = Ctx { world: &mut world, me: ProcessId::from_slot(slot) };
        node.start(&mut ctx);
    }

    let mut hit_horizon = false;
    while let Some(Reverse(next)) = world.queue.pop() {
        if next.time > config.max_time {
            hit_horizon = true;
            break;
        }
        world.now = next.time;
        if !world.draining && world.settled() {
            world.draining = true;
        }
        match next.item {
            Item::Crash(p, None) => world.crash_now(p, None),
            Item::Crash(p, Some(k)) => {
                if !world.crashed[p.slot()] {
                    world.armed_cut[p.slot()] = Some(k);
                }
            }
            Item::Packet { from, to, packet, info } => {
                if world.crashed[to.slot()] {
                    continue;
                }
                world.push_event(to, EventBody::NetRecv { from, packet: info });
                let mut ctx = Ctx { world: &mut world, me: to };
                nodes[to.slot()].on_packet(from, packet, &mut ctx);
            }
            Item::Timer(p, timer) => {
                if !world.crashed[p.slot()] && !(world.draining && timer == Timer::Tick) {
                    let mut ctx = Ctx { world: &mut world, me: p };
                    nodes[p.slot()].on_timer(timer, &mut ctx);
                }
            }
            Item::Ready(p) => {
                let slot = p.slot();
                let due = world.scripts[slot].front().is_some_and(|e| e.time <= world.now);
                if !due || world.current_op[slot].is_some() {
                    continue;
                }
                let entry = world.scripts[slot].pop_front().expect("checked above");
                if world.crashed[slot] {
                    world.dropped.push((p, entry.command));
                    world.schedule_next_ready(p);
                    continue;
                }
                world.ops += 1;
                let op_id = world.ops;
                world.current_op[slot] = Some(op_id);
                let mut ctx = Ctx { world: &mut world, me: p };
                nodes[slot].invoke(op_id, &entry.command, &mut ctx);
            }
        }
    }
    if hit_horizon {
        world.now = config.max_time;
    }
    // Armed cuts that never met a send-to-all fire at the end of the run.
    for p in ProcessId::all(n) {
        if let Some(k) = world.armed_cut[p.slot()] {
            world.crash_now(p, Some(k));
        }
    }

    let pending_ops = ProcessId::all(n)
        .filter(|p| !world.crashed[p.slot()])
        .filter_map(|p| world.current_op[p.slot()].map(|op| (p, op)))
        .collect();
    let report = RunReport {
        end_time: world.now,
        hit_horizon,
        pending_ops,
        never_started: world.scripts.iter().map(VecDeque::len).sum(),
        dropped: world.dropped,
    };
    RunOutput { trace: Trace::new(config.clone(), world.events), report }
}
