//! Operation histories extracted from traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trace::{EventBody, Layer, OpId, OpResult, Operation, Trace};
use crate::types::ProcessId;

/// One client operation. `invoked` and `returned` are positions in the
/// global event order, so they also give real-time precedence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub proc: ProcessId,
    pub op_id: OpId,
    pub op: Operation,
    pub invoked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returned: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<OpResult>,
}

impl OpRecord {
    pub fn pending(&self) -> bool {
        self.returned.is_none()
    }

    /// Real-time order: `self` returned before `other` was invoked.
    pub fn precedes(&self, other: &OpRecord) -> bool {
        self.returned.is_some_and(|r| r < other.invoked)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    /// Ordered by invocation.
    pub ops: Vec<OpRecord>,
}

impl History {
    pub fn new(mut ops: Vec<OpRecord>) -> Self {
        ops.sort_by_key(|o| o.invoked);
        History { ops }
    }

    /// Operations invoked at `layer`. Responses are matched by `(proc, op_id)`.
    pub fn from_trace(trace: &Trace, layer: Layer) -> Self {
        let mut ops: Vec<OpRecord> = Vec::new();
        let mut open: BTreeMap<(ProcessId, OpId), usize> = BTreeMap::new();
        for (i, ev) in trace.events.iter().enumerate() {
            match &ev.body {
                EventBody::Invoke { layer: l, op_id, op } if *l == layer => {
                    open.insert((ev.proc, *op_id), ops.len());
                    ops.push(OpRecord {
                        proc: ev.proc,
                        op_id: *op_id,
                        op: op.clone(),
                        invoked: i,
                        returned: None,
                        result: None,
                    });
                }
                EventBody::Response { layer: l, op_id, result } if *l == layer => {
                    if let Some(k) = open.remove(&(ev.proc, *op_id)) {
                        ops[k].returned = Some(i);
                        ops[k].result = Some(result.clone());
                    }
                }
                _ => {}
            }
        }
        History::new(ops)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn completed(&self) -> impl Iterator<Item = &OpRecord> {
        self.ops.iter().filter(|o| !o.pending())
    }

    pub fn without(&self, k: usize) -> History {
        let mut ops = self.ops.clone();
        ops.remove(k);
        History { ops }
    }
}
