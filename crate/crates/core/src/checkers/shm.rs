//! Structural checks specific to the construction from snapshot objects.

use super::{Verdict, Witness};
use crate::trace::{EventBody, Layer, ShmObject, Trace};
use crate::types::{ProcessId, RegValue};

/// Every delivery of the shared-memory layer is preceded, at the same process,
/// by a fresh `SETSEQ` write whose last set is exactly the delivered set, and
/// own `SETSEQ` writes only ever append.
pub fn check_setseq_before_delivery(trace: &Trace) -> Verdict {
    let n = trace.config.n;
    let mut last: Vec<Option<Vec<crate::types::MessageSet>>> = vec![None; n];
    let mut used = vec![true; n];
    let mut result = Ok(());
    for ev in &trace.events {
        let slot = ev.proc.slot();
        match &ev.body {
            EventBody::ShmWrite { object: ShmObject::SetSeq, value: RegValue::SetSeq(seq) } => {
                if let Some(prev) = &last[slot] {
                    if seq.len() != prev.len() + 1 || seq[..prev.len()] != prev[..] {
                        result = Err(text(ev.proc, "SETSEQ write does not append one set"));
                        break;
                    }
                } else if seq.len() != 1 {
                    result = Err(text(ev.proc, "first SETSEQ write does not hold exactly one set"));
                    break;
                }
                last[slot] = Some(seq.clone());
                used[slot] = false;
            }
            EventBody::ScdDeliver { layer: Layer::ShmScd, set } => {
                let fresh = !used[slot] && last[slot].as_ref().and_then(|s| s.last()) == Some(set);
                if !fresh {
                    result = Err(text(ev.proc, "delivery without a matching SETSEQ write"));
                    break;
                }
                used[slot] = true;
            }
            _ => {}
        }
    }
    Verdict::from_result("setseq_before_delivery", result)
}

fn text(p: ProcessId, what: &str) -> Witness {
    Witness::Text { text: format!("{p}: {what}") }
}
