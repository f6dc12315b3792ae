//! Seeded random crash schedules and workloads.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::sim::{Command, CrashSpec, Workload};
use crate::trace::Time;
use crate::types::ProcessId;

/// The most crashes a majority-based protocol tolerates: `ceil(n/2) - 1`.
pub fn max_tolerated(n: usize) -> usize {
    n.div_ceil(2) - 1
}

/// Up to `max` crashes of distinct processes at times in `0..span`; each
/// crash cuts a send-to-all short with probability one half.
pub fn random_crashes<R: Rng>(rng: &mut R, n: usize, max: usize, span: Time) -> Vec<CrashSpec> {
    let count = rng.gen_range(0..=max.min(n));
    let mut procs: Vec<ProcessId> = ProcessId::all(n).collect();
    procs.shuffle(rng);
    procs
        .into_iter()
        .take(count)
        .map(|proc| CrashSpec {
            proc,
            time: rng.gen_range(0..span.max(1)),
            cut: rng.gen_bool(0.5).then(|| rng.gen_range(0..n)),
        })
        .collect()
}

fn entry<R: Rng>(rng: &mut R, n: usize, span: Time) -> (Time, ProcessId) {
    (rng.gen_range(0..span.max(1)), ProcessId::from_slot(rng.gen_range(0..n)))
}

/// `messages` broadcasts from random processes at random times.
pub fn broadcast_workload<R: Rng>(rng: &mut R, n: usize, messages: usize, span: Time) -> Workload {
    let mut w = Workload::default();
    for k in 0..messages {
        let (time, proc) = entry(rng, n, span);
        w.push(time, proc, Command::Broadcast { data: format!("m{k}") });
    }
    w
}

/// `ops` writes and snapshots over `m` registers; written values are distinct.
pub fn snapshot_workload<R: Rng>(rng: &mut R, n: usize, m: usize, ops: usize, span: Time) -> Workload {
    let mut w = Workload::default();
    for k in 0..ops {
        let (time, proc) = entry(rng, n, span);
        let cmd = if rng.gen_bool(0.5) {
            Command::Write { reg: rng.gen_range(0..m), value: k as i64 + 1 }
        } else {
            Command::Snapshot
        };
        w.push(time, proc, cmd);
    }
    w
}

/// `ops` increments, decrements and reads.
pub fn counter_workload<R: Rng>(rng: &mut R, n: usize, ops: usize, span: Time) -> Workload {
    let mut w = Workload::default();
    for _ in 0..ops {
        let (time, proc) = entry(rng, n, span);
        let cmd = match rng.gen_range(0..3) {
            0 => Command::Inc,
            1 => Command::Dec,
            _ => Command::Read,
        };
        w.push(time, proc, cmd);
    }
    w
}

/// One proposal per process: a random nonempty subset of `0..universe`.
pub fn lattice_workload<R: Rng>(rng: &mut R, n: usize, universe: i64, span: Time) -> Workload {
    let mut w = Workload::default();
    for proc in ProcessId::all(n) {
        let mut value: BTreeSet<i64> = (0..universe).filter(|_| rng.gen_bool(0.3)).collect();
        if value.is_empty() {
            value.insert(rng.gen_range(0..universe));
        }
        w.push(rng.gen_range(0..span.max(1)), proc, Command::Propose { value });
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tolerated_crashes_leave_a_majority() {
        for n in 1..10 {
            let f = max_tolerated(n);
            assert!(2 * (n - f) > n && 2 * (n - f - 1) <= n, "n = {n}");
        }
    }

    #[test]
    fn crashes_are_distinct_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = random_crashes(&mut rng, 5, 2, 50);
            let procs: BTreeSet<_> = c.iter().map(|c| c.proc).collect();
            assert!(c.len() <= 2 && procs.len() == c.len());
        }
    }
}
