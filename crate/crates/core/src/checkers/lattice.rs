//! Lattice agreement task properties.

use std::collections::{BTreeMap, BTreeSet};

use super::{Verdict, Witness};
use crate::objects::Semilattice;
use crate::trace::{Layer, OpResult, Operation, Trace};
use crate::types::ProcessId;

/// Validity (`in_i <= out_i <= lub of all inputs`), pairwise comparability of
/// outputs, and a decision from every proposer in `non_faulty`.
pub fn check_lattice_task<L: Semilattice>(
    inputs: &BTreeMap<ProcessId, L>,
    outputs: &BTreeMap<ProcessId, L>,
    non_faulty: &BTreeSet<ProcessId>,
) -> Vec<Verdict> {
    let lub = inputs.values().skip(1).fold(inputs.values().next().cloned(), |acc, v| acc.map(|a| a.join(v)));
    let validity = (|| {
        for (p, out) in outputs {
            let Some(input) = inputs.get(p) else {
                return Err(Witness::Text { text: format!("{p} decided without proposing") });
            };
            let above_input = input.leq(out);
            let below_lub = lub.as_ref().is_some_and(|l| out.leq(l));
            if !above_input || !below_lub {
                return Err(Witness::Text { text: format!("output of {p} outside [input, lub]") });
            }
        }
        Ok(())
    })();
    let containment = (|| {
        let outs: Vec<_> = outputs.iter().collect();
        for (a, (p, x)) in outs.iter().enumerate() {
            for (q, y) in &outs[a + 1..] {
                if !x.leq(y) && !y.leq(x) {
                    return Err(Witness::Processes { first: **p, second: **q });
                }
            }
        }
        Ok(())
    })();
    let termination = match inputs.keys().find(|p| non_faulty.contains(p) && !outputs.contains_key(p)) {
        Some(p) => Err(Witness::Text { text: format!("{p} proposed but never decided") }),
        None => Ok(()),
    };
    vec![
        Verdict::from_result("lattice_validity", validity),
        Verdict::from_result("lattice_containment", containment),
        Verdict::from_result("lattice_termination", termination),
    ]
}

/// Proposals and decisions recorded at the object layer of a lattice run.
pub fn lattice_task_from_trace(
    trace: &Trace,
) -> (BTreeMap<ProcessId, BTreeSet<i64>>, BTreeMap<ProcessId, BTreeSet<i64>>) {
    let h = super::History::from_trace(trace, Layer::Object);
    let mut inputs = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    for op in h.ops {
        if let Operation::Propose { value } = op.op {
            inputs.insert(op.proc, value);
            if let Some(OpResult::Decided { value }) = op.result {
                outputs.insert(op.proc, value);
            }
        }
    }
    (inputs, outputs)
}
