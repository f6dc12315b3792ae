//! Trace-level oracles. Each returns one [`Verdict`] per property, with a
//! witness that can be re-checked against the trace when it fails.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::{OpId, OpResult, Operation};
use crate::types::{MessageId, ProcessId};

pub mod consistency;
pub mod fifo;
pub mod history;
pub mod lattice;
pub mod scd;
pub mod shm;

pub use consistency::{check_linearizable, check_sequentially_consistent, CounterSpec, SeqSpec, SnapshotSpec};
pub use history::{History, OpRecord};
pub use lattice::{check_lattice_task, lattice_task_from_trace};
pub use scd::check_scd_properties;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Outside the exhaustive bound; nothing is claimed.
    Unchecked,
    /// A liveness property failed in a scenario that demands starvation.
    ExpectedStarvation,
}

/// Evidence attached to a failed verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "witness", rename_all = "snake_case")]
pub enum Witness {
    /// `m` strictly before `m2` at `first`, `m2` strictly before `m` at `second`.
    MsOrdering { first: ProcessId, second: ProcessId, m: MessageId, m2: MessageId },
    /// A message and the process whose record is at fault.
    Message { proc: ProcessId, id: MessageId },
    /// Prefix unions `MS_first^x` and `MS_second^y` are incomparable.
    Containment { first: ProcessId, x: usize, second: ProcessId, y: usize },
    /// A sub-history with no legal serialization, minimal under single-operation removal.
    History { ops: Vec<OpRecord> },
    /// An operation that should have returned but did not.
    Operation { proc: ProcessId, op_id: OpId, op: Operation, result: Option<OpResult> },
    Processes { first: ProcessId, second: ProcessId },
    Text { text: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn pass(property: impl Into<String>) -> Self {
        Verdict { property: property.into(), status: Status::Pass, witness: None }
    }

    pub fn fail(property: impl Into<String>, witness: Witness) -> Self {
        Verdict { property: property.into(), status: Status::Fail, witness: Some(witness) }
    }

    pub fn unchecked(property: impl Into<String>, why: impl Into<String>) -> Self {
        Verdict { property: property.into(), status: Status::Unchecked, witness: Some(Witness::Text { text: why.into() }) }
    }

    pub fn from_result(property: impl Into<String>, r: Result<(), Witness>) -> Self {
        match r {
            Ok(()) => Verdict::pass(property),
            Err(w) => Verdict::fail(property, w),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unchecked => "UNCHECKED",
            Status::ExpectedStarvation => "EXPECTED-STARVATION",
        };
        write!(f, "{status} {}", self.property)?;
        if let Some(w) = &self.witness {
            write!(f, " {}", serde_json::to_string(w).unwrap_or_default())?;
        }
        Ok(())
    }
}
