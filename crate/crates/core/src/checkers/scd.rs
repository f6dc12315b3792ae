//! Validity, Integrity, MS-Ordering, Termination-1, Termination-2 and
//! Containment over the deliveries recorded at one layer.

use std::collections::{BTreeMap, BTreeSet};

use super::{Verdict, Witness};
use crate::trace::{EventBody, Layer, OpId, Operation, Trace};
use crate::types::{MessageId, ProcessId};

pub const PROPERTIES: [&str; 6] =
    ["validity", "integrity", "ms_ordering", "termination_1", "termination_2", "containment"];

/// Per process, the position of the set that delivered each message.
pub type DeliveryIndex = BTreeMap<ProcessId, BTreeMap<MessageId, usize>>;

pub fn delivery_index(deliveries: &BTreeMap<ProcessId, Vec<Vec<MessageId>>>) -> DeliveryIndex {
    deliveries
        .iter()
        .map(|(p, sets)| {
            let mut idx = BTreeMap::new();
            for (k, s) in sets.iter().enumerate() {
                for id in s {
                    idx.entry(*id).or_insert(k);
                }
            }
            (*p, idx)
        })
        .collect()
}

pub fn check_validity(trace: &Trace, layer: Layer) -> Result<(), Witness> {
    let mut invoked = BTreeSet::new();
    for ev in &trace.events {
        match &ev.body {
            EventBody::Invoke { layer: l, op: Operation::Broadcast { id, .. }, .. } if *l == layer => {
                invoked.insert(*id);
            }
            EventBody::ScdDeliver { layer: l, set } if *l == layer => {
                if let Some(id) = set.ids().find(|id| !invoked.contains(id)) {
                    return Err(Witness::Message { proc: ev.proc, id });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn check_integrity(deliveries: &BTreeMap<ProcessId, Vec<Vec<MessageId>>>) -> Result<(), Witness> {
    for (p, sets) in deliveries {
        let mut seen = BTreeSet::new();
        for s in sets {
            if s.is_empty() {
                return Err(Witness::Text { text: format!("{p} delivered an empty set") });
            }
            for id in s {
                if !seen.insert(*id) {
                    return Err(Witness::Message { proc: *p, id: *id });
                }
            }
        }
    }
    Ok(())
}

/// Fails on the first `(i, j, m, m2)`, in process then message-id order, with
/// `m` strictly before `m2` at `i` and `m2` strictly before `m` at `j`.
pub fn check_ms_ordering(index: &DeliveryIndex) -> Result<(), Witness> {
    let procs: Vec<_> = index.keys().copied().collect();
    for (a, &i) in procs.iter().enumerate() {
        for &j in &procs[a + 1..] {
            let (ii, ij) = (&index[&i], &index[&j]);
            let common: Vec<MessageId> = ii.keys().filter(|m| ij.contains_key(m)).copied().collect();
            for &m in &common {
                for &m2 in &common {
                    let forward = ii[&m] < ii[&m2] && ij[&m2] < ij[&m];
                    let backward = ij[&m] < ij[&m2] && ii[&m2] < ii[&m];
                    if forward {
                        return Err(Witness::MsOrdering { first: i, second: j, m, m2 });
                    }
                    if backward {
                        return Err(Witness::MsOrdering { first: j, second: i, m, m2 });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Every broadcast invoked by a non-faulty process returns and is delivered
/// by its sender.
pub fn check_termination_1(trace: &Trace, layer: Layer, index: &DeliveryIndex) -> Result<(), Witness> {
    let faulty = trace.faulty();
    let mut open: BTreeMap<(ProcessId, OpId), (Operation, MessageId)> = BTreeMap::new();
    let mut ids = Vec::new();
    for ev in &trace.events {
        match &ev.body {
            EventBody::Invoke { layer: l, op_id, op } if *l == layer => {
                if let Operation::Broadcast { id, .. } = op {
                    open.insert((ev.proc, *op_id), (op.clone(), *id));
                    ids.push((ev.proc, *id));
                }
            }
            EventBody::Response { layer: l, op_id, .. } if *l == layer => {
                open.remove(&(ev.proc, *op_id));
            }
            _ => {}
        }
    }
    if let Some(((proc, op_id), (op, _))) = open.into_iter().find(|((p, _), _)| !faulty.contains(p)) {
        return Err(Witness::Operation { proc, op_id, op, result: None });
    }
    for (p, id) in ids {
        if !faulty.contains(&p) && !index[&p].contains_key(&id) {
            return Err(Witness::Message { proc: p, id });
        }
    }
    Ok(())
}

/// A message delivered anywhere, even by a process that later crashed, is
/// delivered by every non-faulty process.
pub fn check_termination_2(trace: &Trace, index: &DeliveryIndex) -> Result<(), Witness> {
    let faulty = trace.faulty();
    let all: BTreeSet<MessageId> = index.values().flat_map(|m| m.keys().copied()).collect();
    for (p, idx) in index {
        if faulty.contains(p) {
            continue;
        }
        if let Some(id) = all.iter().find(|id| !idx.contains_key(id)) {
            return Err(Witness::Message { proc: *p, id: *id });
        }
    }
    Ok(())
}

/// Exact prefix-union comparability. For a prefix `U = MS_i^x` and process
/// `j`, the prefixes of `j` containing `U` start at `y0`; comparability holds
/// for every `y` iff `MS_j^(y0-1)` (or all of `j`'s deliveries, when no prefix
/// contains `U`) is a subset of `U`.
pub fn check_containment(
    deliveries: &BTreeMap<ProcessId, Vec<Vec<MessageId>>>,
    index: &DeliveryIndex,
) -> Result<(), Witness> {
    for (&i, sets) in deliveries {
        let mut union: BTreeSet<MessageId> = BTreeSet::new();
        for x in 1..=sets.len() {
            union.extend(sets[x - 1].iter().copied());
            for (&j, sets_j) in deliveries {
                if j == i {
                    continue;
                }
                let pos = &index[&j];
                let covering = union.iter().map(|m| pos.get(m).copied()).collect::<Option<Vec<_>>>();
                let below = match covering {
                    Some(ps) => ps.into_iter().max().map_or(0, |mx| mx),
                    None => sets_j.len(),
                };
                // `below` sets of j must all lie inside the union.
                for (k, s) in sets_j.iter().take(below).enumerate() {
                    if s.iter().any(|m| !union.contains(m)) {
                        return Err(Witness::Containment { first: i, x, second: j, y: k + 1 });
                    }
                }
            }
        }
    }
    Ok(())
}

/// The full property suite over the deliveries of `layer`.
pub fn check_scd_properties(trace: &Trace, layer: Layer) -> Vec<Verdict> {
    let deliveries = trace.deliveries(layer);
    let index = delivery_index(&deliveries);
    vec![
        Verdict::from_result("validity", check_validity(trace, layer)),
        Verdict::from_result("integrity", check_integrity(&deliveries)),
        Verdict::from_result("ms_ordering", check_ms_ordering(&index)),
        Verdict::from_result("termination_1", check_termination_1(trace, layer, &index)),
        Verdict::from_result("termination_2", check_termination_2(trace, &index)),
        Verdict::from_result("containment", check_containment(&deliveries, &index)),
    ]
}
