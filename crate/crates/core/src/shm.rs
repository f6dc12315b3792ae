//! Set-constrained delivery broadcast built from two single-writer snapshot
//! objects, `SENT` and `SETSEQ`.
//!
//! [`ShmScd`] is written as a state machine that issues one shared-memory
//! request at a time and resumes when the reply comes back, so the same code
//! runs over the in-simulator [`SnapshotOracle`] and over a snapshot object
//! that is itself emulated by message passing.
//!
//! Application broadcasts and background ticks are queued as jobs and run one
//! after the other, first come first served: that queue is the local mutex.

use std::collections::{BTreeSet, VecDeque};

use crate::trace::{OpId, ShmObject};
use crate::types::{AppMessage, MessageId, MessageSet, Payload, ProcessId, RegValue};

/// An atomic snapshot object. Each call is one indivisible step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotOracle {
    entries: Vec<RegValue>,
}

impl SnapshotOracle {
    pub fn new(initial: Vec<RegValue>) -> Self {
        SnapshotOracle { entries: initial }
    }

    pub fn write(&mut self, index: usize, value: RegValue) {
        self.entries[index] = value;
    }

    pub fn snapshot(&self) -> Vec<RegValue> {
        self.entries.clone()
    }
}

/// The two snapshot objects of the construction, one entry per process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedMemory {
    pub sent: SnapshotOracle,
    pub setseq: SnapshotOracle,
}

impl SharedMemory {
    pub fn new(n: usize) -> Self {
        SharedMemory {
            sent: SnapshotOracle::new(vec![RegValue::Messages(BTreeSet::new()); n]),
            setseq: SnapshotOracle::new(vec![RegValue::SetSeq(Vec::new()); n]),
        }
    }

    pub fn object(&mut self, object: ShmObject) -> &mut SnapshotOracle {
        match object {
            ShmObject::Sent => &mut self.sent,
            ShmObject::SetSeq => &mut self.setseq,
        }
    }

    /// Performs `request` on behalf of `me`.
    pub fn apply(&mut self, me: ProcessId, request: &ShmRequest) -> ShmReply {
        match request {
            ShmRequest::Write { object, value } => {
                self.object(*object).write(me.slot(), value.clone());
                ShmReply::Written
            }
            ShmRequest::Snapshot { object } => ShmReply::View(self.object(*object).snapshot()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShmRequest {
    /// Write the caller's own entry.
    Write { object: ShmObject, value: RegValue },
    Snapshot { object: ShmObject },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShmReply {
    Written,
    View(Vec<RegValue>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShmAction {
    /// Perform this operation and pass the reply to [`ShmScd::on_reply`].
    Request(ShmRequest),
    Deliver(MessageSet),
    Complete { op_id: OpId, id: MessageId },
    /// A background iteration ended; `did_work` when it delivered something.
    TickDone { did_work: bool },
}

#[derive(Clone, Debug)]
enum Job {
    Broadcast { op_id: OpId, msg: AppMessage },
    Tick,
}

#[derive(Clone, Debug)]
enum Phase {
    WriteSent,
    SnapshotSetSeq,
    CatchupWrite(MessageSet),
    SnapshotSent,
    ProgressWrite(MessageSet),
}

#[derive(Clone, Debug)]
struct Running {
    job: Job,
    phase: Phase,
    did_work: bool,
}

#[derive(Clone, Debug)]
pub struct ShmScd {
    me: ProcessId,
    n: usize,
    next_sn: u64,
    own_sent: BTreeSet<AppMessage>,
    sent: Vec<BTreeSet<AppMessage>>,
    setseq: Vec<Vec<MessageSet>>,
    members: BTreeSet<MessageId>,
    jobs: VecDeque<Job>,
    running: Option<Running>,
    tick_queued: bool,
}

fn messages(v: &RegValue) -> BTreeSet<AppMessage> {
    match v {
        RegValue::Messages(m) => m.clone(),
        other => panic!("SENT entry holds {other:?}"),
    }
}

fn set_seq(v: &RegValue) -> Vec<MessageSet> {
    match v {
        RegValue::SetSeq(s) => s.clone(),
        other => panic!("SETSEQ entry holds {other:?}"),
    }
}

impl ShmScd {
    pub fn new(me: ProcessId, n: usize) -> Self {
        ShmScd {
            me,
            n,
            next_sn: 0,
            own_sent: BTreeSet::new(),
            sent: vec![BTreeSet::new(); n],
            setseq: vec![Vec::new(); n],
            members: BTreeSet::new(),
            jobs: VecDeque::new(),
            running: None,
            tick_queued: false,
        }
    }

    /// Messages delivered so far.
    pub fn members(&self) -> &BTreeSet<MessageId> {
        &self.members
    }

    /// Local copy of the own `SETSEQ` entry.
    pub fn own_set_seq(&self) -> &[MessageSet] {
        &self.setseq[self.me.slot()]
    }

    pub fn busy(&self) -> bool {
        self.running.is_some()
    }

    pub fn next_id(&self) -> MessageId {
        MessageId::new(self.me, self.next_sn)
    }

    pub fn broadcast(&mut self, op_id: OpId, payload: Payload) -> (MessageId, Vec<ShmAction>) {
        let id = self.next_id();
        self.next_sn += 1;
        self.jobs.push_back(Job::Broadcast { op_id, msg: AppMessage::new(id, payload) });
        (id, self.pump())
    }

    /// Queues one background iteration unless one is already waiting.
    pub fn tick(&mut self) -> Vec<ShmAction> {
        if !self.tick_queued {
            self.tick_queued = true;
            self.jobs.push_back(Job::Tick);
        }
        self.pump()
    }

    fn pump(&mut self) -> Vec<ShmAction> {
        let mut out = Vec::new();
        if self.running.is_some() {
            return out;
        }
        let Some(job) = self.jobs.pop_front() else {
            return out;
        };
        match &job {
            Job::Broadcast { msg, .. } => {
                self.own_sent.insert(msg.clone());
                let value = RegValue::Messages(self.own_sent.clone());
                self.running = Some(Running { job, phase: Phase::WriteSent, did_work: false });
                out.push(ShmAction::Request(ShmRequest::Write { object: ShmObject::Sent, value }));
            }
            Job::Tick => {
                self.tick_queued = false;
                self.running = Some(Running { job, phase: Phase::SnapshotSetSeq, did_work: false });
                out.push(self.snapshot_set_seq());
            }
        }
        out
    }

    fn snapshot_set_seq(&mut self) -> ShmAction {
        self.set_phase(Phase::SnapshotSetSeq);
        ShmAction::Request(ShmRequest::Snapshot { object: ShmObject::SetSeq })
    }

    fn set_phase(&mut self, phase: Phase) {
        self.running.as_mut().expect("a job is running").phase = phase;
    }

    /// Appends `set` to the own sequence and asks for it to be published.
    fn append(&mut self, set: MessageSet, then: fn(MessageSet) -> Phase) -> ShmAction {
        assert!(!set.is_empty(), "empty sets are never appended");
        let own = &mut self.setseq[self.me.slot()];
        own.push(set.clone());
        let value = RegValue::SetSeq(own.clone());
        self.set_phase(then(set));
        ShmAction::Request(ShmRequest::Write { object: ShmObject::SetSeq, value })
    }

    fn catchup_step(&mut self) -> ShmAction {
        for j in 0..self.n {
            let found = self.setseq[j].iter().find(|s| !s.is_subset_of(&self.members));
            if let Some(set) = found {
                let fresh: MessageSet = set.iter().filter(|m| !self.members.contains(&m.id)).cloned().collect();
                return self.append(fresh, Phase::CatchupWrite);
            }
        }
        self.set_phase(Phase::SnapshotSent);
        ShmAction::Request(ShmRequest::Snapshot { object: ShmObject::Sent })
    }

    fn deliver(&mut self, set: MessageSet, out: &mut Vec<ShmAction>) {
        self.members.extend(set.ids());
        self.running.as_mut().expect("a job is running").did_work = true;
        out.push(ShmAction::Deliver(set));
    }

    fn finish(&mut self, out: &mut Vec<ShmAction>) {
        let run = self.running.take().expect("a job is running");
        match run.job {
            Job::Broadcast { op_id, msg } => out.push(ShmAction::Complete { op_id, id: msg.id }),
            Job::Tick => out.push(ShmAction::TickDone { did_work: run.did_work }),
        }
        out.extend(self.pump());
    }

    pub fn on_reply(&mut self, reply: ShmReply) -> Vec<ShmAction> {
        let mut out = Vec::new();
        let phase = self.running.as_ref().expect("reply without a request").phase.clone();
        match (phase, reply) {
            (Phase::WriteSent, ShmReply::Written) => out.push(self.snapshot_set_seq()),
            (Phase::SnapshotSetSeq, ShmReply::View(view)) => {
                assert_eq!(view.len(), self.n);
                let fresh: Vec<Vec<MessageSet>> = view.iter().map(set_seq).collect();
                debug_assert_eq!(fresh[self.me.slot()], self.setseq[self.me.slot()]);
                self.setseq = fresh;
                out.push(self.catchup_step());
            }
            (Phase::CatchupWrite(set), ShmReply::Written) => {
                self.deliver(set, &mut out);
                out.push(self.catchup_step());
            }
            (Phase::SnapshotSent, ShmReply::View(view)) => {
                assert_eq!(view.len(), self.n);
                self.sent = view.iter().map(messages).collect();
                let fresh: MessageSet = self
                    .sent
                    .iter()
                    .flatten()
                    .filter(|m| !self.members.contains(&m.id))
                    .cloned()
                    .collect();
                if fresh.is_empty() {
                    self.finish(&mut out);
                } else {
                    out.push(self.append(fresh, Phase::ProgressWrite));
                }
            }
            (Phase::ProgressWrite(set), ShmReply::Written) => {
                self.deliver(set, &mut out);
                self.finish(&mut out);
            }
            (phase, reply) => panic!("reply {reply:?} does not fit phase {phase:?}"),
        }
        out
    }
}
