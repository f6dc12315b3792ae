//! Exhaustive linearizability and sequential-consistency checking.
//!
//! The main search is a depth-first walk over the operations that may come
//! next, memoizing `(already placed, object state)` pairs that lead nowhere.
//! [`naive_serializable`] enumerates whole permutations instead; the two are
//! cross-checked in tests.
//!
//! Pending operations may be placed anywhere after their invocation or left
//! out, since they might or might not have taken effect.

use std::collections::HashSet;
use std::hash::Hash;

use super::history::{History, OpRecord};
use super::{Verdict, Witness};
use crate::trace::{OpResult, Operation};
use crate::types::RegValue;

/// Default exhaustive-mode bound on history length.
pub const DEFAULT_MAX_OPS: usize = 8;

/// A sequential specification.
pub trait SeqSpec {
    type State: Clone + Eq + Hash;

    fn init(&self) -> Self::State;

    /// The state after `op`, or `None` when `result` is impossible from `state`.
    /// A missing result (pending operation) is always possible.
    fn apply(&self, state: &Self::State, op: &Operation, result: Option<&OpResult>) -> Option<Self::State>;
}

/// `m` registers, initially `initial`, with whole-array snapshots.
#[derive(Clone, Debug)]
pub struct SnapshotSpec {
    pub initial: Vec<RegValue>,
}

impl SnapshotSpec {
    pub fn ints(m: usize) -> Self {
        SnapshotSpec { initial: vec![RegValue::Int(0); m] }
    }
}

impl SeqSpec for SnapshotSpec {
    type State = Vec<RegValue>;

    fn init(&self) -> Self::State {
        self.initial.clone()
    }

    fn apply(&self, state: &Self::State, op: &Operation, result: Option<&OpResult>) -> Option<Self::State> {
        match (op, result) {
            (Operation::Write { reg, value }, None | Some(OpResult::Ack)) if *reg < state.len() => {
                let mut s = state.clone();
                s[*reg] = value.clone();
                Some(s)
            }
            (Operation::Snapshot, None) => Some(state.clone()),
            (Operation::Snapshot, Some(OpResult::Snapshot { values })) if values == state => Some(state.clone()),
            _ => None,
        }
    }
}

/// Integer counter starting at 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct CounterSpec;

impl SeqSpec for CounterSpec {
    type State = i64;

    fn init(&self) -> i64 {
        0
    }

    fn apply(&self, state: &i64, op: &Operation, result: Option<&OpResult>) -> Option<i64> {
        match (op, result) {
            (Operation::Increase, None | Some(OpResult::Ack)) => Some(state + 1),
            (Operation::Decrease, None | Some(OpResult::Ack)) => Some(state - 1),
            (Operation::Read, None) => Some(*state),
            (Operation::Read, Some(OpResult::Value { value })) if value == state => Some(*state),
            _ => None,
        }
    }
}

/// Which orderings a serialization has to preserve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// Real-time precedence (linearizability).
    RealTime,
    /// Per-process program order only (sequential consistency).
    Program,
}

fn must_precede(a: &OpRecord, b: &OpRecord, order: Order) -> bool {
    match order {
        Order::RealTime => a.precedes(b),
        Order::Program => a.proc == b.proc && !a.pending() && a.invoked < b.invoked,
    }
}

/// Memoized search for a legal serialization.
pub fn serializable<S: SeqSpec>(h: &History, spec: &S, order: Order) -> bool {
    let ops = &h.ops;
    assert!(ops.len() <= 64, "search is limited to 64 operations");
    let pred: Vec<u64> = ops
        .iter()
        .map(|b| {
            ops.iter()
                .enumerate()
                .filter(|(_, a)| must_precede(a, b, order))
                .fold(0u64, |m, (i, _)| m | 1 << i)
        })
        .collect();
    let must: u64 = ops.iter().enumerate().filter(|(_, o)| !o.pending()).fold(0, |m, (i, _)| m | 1 << i);
    let mut dead: HashSet<(u64, S::State)> = HashSet::new();
    dfs(ops, spec, &pred, must, 0, spec.init(), &mut dead)
}

fn dfs<S: SeqSpec>(
    ops: &[OpRecord],
    spec: &S,
    pred: &[u64],
    must: u64,
    placed: u64,
    state: S::State,
    dead: &mut HashSet<(u64, S::State)>,
) -> bool {
    if placed & must == must {
        return true;
    }
    if dead.contains(&(placed, state.clone())) {
        return false;
    }
    for (k, op) in ops.iter().enumerate() {
        let bit = 1u64 << k;
        if placed & bit != 0 || pred[k] & !placed != 0 {
            continue;
        }
        if let Some(next) = spec.apply(&state, &op.op, op.result.as_ref()) {
            if dfs(ops, spec, pred, must, placed | bit, next, dead) {
                return true;
            }
        }
    }
    dead.insert((placed, state));
    false
}

/// Independent strategy: every subset of pending operations, every
/// permutation, filtered by order and replayed from scratch.
pub fn naive_serializable<S: SeqSpec>(h: &History, spec: &S, order: Order) -> bool {
    let pending: Vec<usize> = (0..h.ops.len()).filter(|&k| h.ops[k].pending()).collect();
    let completed: Vec<usize> = (0..h.ops.len()).filter(|&k| !h.ops[k].pending()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen = completed.clone();
        chosen.extend(pending.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, k)| *k));
        let mut found = false;
        permute(&mut chosen, 0, &mut |perm| {
            if found {
                return;
            }
            let ordered = perm.iter().enumerate().all(|(x, &a)| {
                perm[x + 1..].iter().all(|&b| !must_precede(&h.ops[b], &h.ops[a], order))
            });
            if !ordered {
                return;
            }
            let mut state = spec.init();
            for &k in perm {
                match spec.apply(&state, &h.ops[k].op, h.ops[k].result.as_ref()) {
                    Some(s) => state = s,
                    None => return,
                }
            }
            found = true;
        });
        if found {
            return true;
        }
    }
    false
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Drops queries one at a time while the remainder still has no legal
/// serialization. Updates are kept so every observed value stays explained.
pub fn minimal_failing<S: SeqSpec>(h: &History, spec: &S, order: Order) -> History {
    let mut cur = h.clone();
    let mut k = 0;
    while k < cur.len() {
        if !cur.ops[k].op.is_query() {
            k += 1;
            continue;
        }
        let smaller = cur.without(k);
        if !serializable(&smaller, spec, order) {
            cur = smaller;
        } else {
            k += 1;
        }
    }
    cur
}

fn check<S: SeqSpec>(property: &str, h: &History, spec: &S, order: Order, max_ops: usize) -> Verdict {
    if h.len() > max_ops {
        return Verdict::unchecked(property, format!("{} operations exceed the bound of {max_ops}", h.len()));
    }
    if serializable(h, spec, order) {
        Verdict::pass(property)
    } else {
        Verdict::fail(property, Witness::History { ops: minimal_failing(h, spec, order).ops })
    }
}

pub fn check_linearizable<S: SeqSpec>(h: &History, spec: &S, max_ops: usize) -> Verdict {
    check("linearizability", h, spec, Order::RealTime, max_ops)
}

pub fn check_sequentially_consistent<S: SeqSpec>(h: &History, spec: &S, max_ops: usize) -> Verdict {
    check("sequential_consistency", h, spec, Order::Program, max_ops)
}
