//! Identities, messages, message sets and timestamps shared by every layer.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a simulated process. Indices are 1-based, as in `p_1 .. p_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u32);

impl ProcessId {
    /// Panics if `index` is zero.
    pub fn new(index: u32) -> Self {
        assert!(index >= 1, "process ids are 1-based");
        ProcessId(index)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based slot, for indexing per-process arrays.
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_slot(slot: usize) -> Self {
        ProcessId(slot as u32 + 1)
    }

    /// All processes of an `n`-process system, in id order.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (0..n).map(ProcessId::from_slot)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Sender-local sequence number.
pub type SeqNum = u64;

/// Identity of an application message: the broadcaster and its local date.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub sender: ProcessId,
    pub sn: SeqNum,
}

impl MessageId {
    pub fn new(sender: ProcessId, sn: SeqNum) -> Self {
        MessageId { sender, sn }
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.sender.get(), self.sn)
    }
}

/// Lexicographic write stamp `<date, proc>`.
///
/// `proc == 0` is the placeholder carried by initial register values; it
/// orders below every real process id.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Timestamp {
    pub date: u64,
    pub proc: u32,
}

impl Timestamp {
    pub const INITIAL: Timestamp = Timestamp { date: 0, proc: 0 };

    pub fn new(date: u64, proc: ProcessId) -> Self {
        Timestamp { date, proc: proc.get() }
    }
}

/// Strict lexicographic order on timestamps: date first, process id breaks ties.
pub fn ts_less(a: Timestamp, b: Timestamp) -> bool {
    a.date < b.date || (a.date == b.date && a.proc < b.proc)
}

/// Pointwise extension of `<=` over timestamp arrays.
///
/// Panics if the arrays differ in length.
pub fn tsa_leq(a: &[Timestamp], b: &[Timestamp]) -> bool {
    assert_eq!(a.len(), b.len(), "timestamp arrays must have equal length");
    a.iter().zip(b).all(|(x, y)| x == y || ts_less(*x, *y))
}

/// Value stored in a snapshot register.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegValue {
    Int(i64),
    /// A set of application messages (the `SENT` entries of the shared-memory construction).
    Messages(BTreeSet<AppMessage>),
    /// A sequence of delivered sets (the `SETSEQ` entries).
    SetSeq(Vec<MessageSet>),
}

impl Default for RegValue {
    fn default() -> Self {
        RegValue::Int(0)
    }
}

/// Content of an application message.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Payload {
    /// Opaque application data.
    Data { data: String },
    /// Pure synchronization message.
    Sync { from: ProcessId },
    Write { from: ProcessId, reg: usize, value: RegValue, ts: Timestamp },
    Plus { from: ProcessId },
    Minus { from: ProcessId },
    Propose { from: ProcessId, value: BTreeSet<i64> },
}

impl Payload {
    pub fn data(s: impl Into<String>) -> Self {
        Payload::Data { data: s.into() }
    }

    /// The process a pattern message was issued by, if the payload carries one.
    pub fn issuer(&self) -> Option<ProcessId> {
        match self {
            Payload::Data { .. } => None,
            Payload::Sync { from }
            | Payload::Write { from, .. }
            | Payload::Plus { from }
            | Payload::Minus { from }
            | Payload::Propose { from, .. } => Some(*from),
        }
    }
}

/// A broadcast application message. Equality, ordering and hashing use the id only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AppMessage {
    pub id: MessageId,
    pub payload: Payload,
}

impl AppMessage {
    pub fn new(id: MessageId, payload: Payload) -> Self {
        AppMessage { id, payload }
    }
}

impl PartialEq for AppMessage {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for AppMessage {}

impl PartialOrd for AppMessage {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AppMessage {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

impl std::hash::Hash for AppMessage {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

/// A set of application messages, kept sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageSet(BTreeSet<AppMessage>);

impl MessageSet {
    pub fn new() -> Self {
        MessageSet(BTreeSet::new())
    }

    pub fn insert(&mut self, m: AppMessage) -> bool {
        self.0.insert(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AppMessage> {
        self.0.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.0.iter().map(|m| m.id)
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.0.iter().any(|m| m.id == id)
    }

    pub fn is_subset_of(&self, ids: &BTreeSet<MessageId>) -> bool {
        self.ids().all(|id| ids.contains(&id))
    }

    pub fn into_inner(self) -> BTreeSet<AppMessage> {
        self.0
    }
}

impl FromIterator<AppMessage> for MessageSet {
    fn from_iter<I: IntoIterator<Item = AppMessage>>(iter: I) -> Self {
        MessageSet(iter.into_iter().collect())
    }
}

impl From<BTreeSet<AppMessage>> for MessageSet {
    fn from(s: BTreeSet<AppMessage>) -> Self {
        MessageSet(s)
    }
}

impl<'a> IntoIterator for &'a MessageSet {
    type Item = &'a AppMessage;
    type IntoIter = std::collections::btree_set::Iter<'a, AppMessage>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
