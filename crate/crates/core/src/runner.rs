//! Run, check and persist: the pipeline shared by the binary and the examples.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::checkers::Verdict;
use crate::metrics::{report_metrics, Metrics};
use crate::sim::{ConfigError, RunReport, SimConfig, Workload};
use crate::stack;
use crate::trace::Trace;
use crate::verify::{check_trace, CheckOptions};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";

#[derive(Clone, Debug)]
pub struct Checked {
    pub trace: Trace,
    pub report: RunReport,
    pub metrics: Metrics,
    pub verdicts: Vec<Verdict>,
}

impl Checked {
    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(Verdict::failed)
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join(TRACE_FILE))?);
        self.trace.write_jsonl(&mut w).map_err(io::Error::other)?;
        w.flush()?;
        let metrics = serde_json::to_string_pretty(&self.metrics).map_err(io::Error::other)?;
        fs::write(dir.join(METRICS_FILE), metrics + "\n")?;
        fs::write(dir.join(VERDICTS_FILE), verdict_lines(&self.verdicts))?;
        Ok(())
    }
}

pub fn verdict_lines(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(|v| serde_json::to_string(v).expect("verdicts serialize") + "\n").collect()
}

/// Checks a stored or freshly produced trace.
pub fn check(trace: Trace, report: RunReport, opts: &CheckOptions) -> Checked {
    let metrics = report_metrics(&trace);
    let verdicts = check_trace(&trace, opts);
    Checked { trace, report, metrics, verdicts }
}

pub fn run_checked(config: &SimConfig, workload: &Workload, opts: &CheckOptions) -> Result<Checked, ConfigError> {
    let out = stack::run(config, workload)?;
    Ok(check(out.trace, out.report, opts))
}

/// Evaluates `f` for every seed on the rayon pool; results come back in seed order.
pub fn sweep<T, F>(seeds: Range<u64>, f: F) -> Vec<(u64, T)>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    seeds.into_par_iter().map(|s| (s, f(s))).collect()
}

/// One line per seed of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub failed: Vec<String>,
    pub expected_starvation: bool,
    pub max_forward_sends: u64,
    pub max_latency: Option<u64>,
}

impl SeedSummary {
    pub fn of(seed: u64, c: &Checked) -> Self {
        SeedSummary {
            seed,
            failed: c.verdicts.iter().filter(|v| v.failed()).map(|v| v.property.clone()).collect(),
            expected_starvation: c
                .verdicts
                .iter()
                .any(|v| v.status == crate::checkers::Status::ExpectedStarvation),
            max_forward_sends: c.metrics.max_forward_sends(),
            max_latency: c.metrics.max_latency(),
        }
    }
}
