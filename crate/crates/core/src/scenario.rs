//! TOML scenario files.
//!
//! ```toml
//! name = "two-writers"
//! n = 3
//! t = 1
//! seed = 7
//! stack = "snapshot"       # fifo, scd, snapshot, snapshot-sc, counter, counter-sc,
//!                          # lattice, shm-scd, shm-scd-roundtrip
//! delay = { bounded = 10 } # or { unbounded = <mean> }
//! registers = 2            # snapshot stacks, default n
//! checks = ["all"]         # all, scd, lin, sc, lattice
//! expect = "starvation"    # optional: a broadcast must stay pending
//!
//! [[crashes]]
//! proc = 3
//! time = 0
//! cut = 1                  # optional
//!
//! [[workload]]
//! time = 0
//! proc = 1
//! op = "write"             # broadcast [data], write [reg, value], snapshot,
//! args = [0, 5]            # inc, dec, read, propose [ints...]
//! ```
//!
//! Optional keys `max_time`, `relay` (`echo` or `suppress_covered`),
//! `ticks`, `tick_gap` and `shm_step` map to the fields of [`SimConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Command, ConfigError, CrashSpec, DelayModel, RelayMode, SimConfig, StackKind, Workload, WorkloadEntry};
use crate::trace::Time;
use crate::types::ProcessId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioDelay {
    Bounded(Time),
    Unbounded(Time),
}

impl From<ScenarioDelay> for DelayModel {
    fn from(d: ScenarioDelay) -> Self {
        match d {
            ScenarioDelay::Bounded(delta) => DelayModel::Bounded { delta },
            ScenarioDelay::Unbounded(mean) => DelayModel::Unbounded { mean },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arg {
    Int(i64),
    Str(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOp {
    pub time: Time,
    pub proc: ProcessId,
    pub op: String,
    #[serde(default)]
    pub args: Vec<Arg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    All,
    Scd,
    Lin,
    Sc,
    Lattice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Some broadcast by a live process stays pending until the run ends.
    Starvation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    pub t: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stack: StackKind,
    pub delay: ScenarioDelay,
    #[serde(default)]
    pub registers: Option<usize>,
    #[serde(default)]
    pub max_time: Option<Time>,
    #[serde(default)]
    pub relay: RelayMode,
    #[serde(default)]
    pub ticks: Option<bool>,
    #[serde(default)]
    pub tick_gap: Option<Time>,
    #[serde(default)]
    pub shm_step: Option<Time>,
    #[serde(default)]
    pub crashes: Vec<CrashSpec>,
    #[serde(default)]
    pub workload: Vec<ScenarioOp>,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

fn default_checks() -> Vec<CheckKind> {
    vec![CheckKind::All]
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("workload[{index}].{field}: {reason}")]
    Field { index: usize, field: &'static str, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn int(args: &[Arg], k: usize, index: usize) -> Result<i64, ScenarioError> {
    match args.get(k) {
        Some(Arg::Int(v)) => Ok(*v),
        other => Err(ScenarioError::Field {
            index,
            field: "args",
            reason: format!("argument {k} must be an integer, got {other:?}"),
        }),
    }
}

impl ScenarioOp {
    pub fn command(&self, index: usize) -> Result<Command, ScenarioError> {
        let arity = |k: usize| {
            if self.args.len() == k {
                Ok(())
            } else {
                Err(ScenarioError::Field {
                    index,
                    field: "args",
                    reason: format!("`{}` takes {k} arguments, got {}", self.op, self.args.len()),
                })
            }
        };
        Ok(match self.op.as_str() {
            "broadcast" => {
                let data = match self.args.as_slice() {
                    [] => String::new(),
                    [Arg::Str(s)] => s.clone(),
                    [Arg::Int(v)] => v.to_string(),
                    _ => arity(1).map(|_| String::new())?,
                };
                Command::Broadcast { data }
            }
            "write" => {
                arity(2)?;
                let reg = int(&self.args, 0, index)?;
                let reg = usize::try_from(reg).map_err(|_| ScenarioError::Field {
                    index,
                    field: "args",
                    reason: format!("register {reg} is negative"),
                })?;
                Command::Write { reg, value: int(&self.args, 1, index)? }
            }
            "snapshot" => arity(0).map(|_| Command::Snapshot)?,
            "inc" => arity(0).map(|_| Command::Inc)?,
            "dec" => arity(0).map(|_| Command::Dec)?,
            "read" => arity(0).map(|_| Command::Read)?,
            "propose" => {
                let value = (0..self.args.len()).map(|k| int(&self.args, k, index)).collect::<Result<_, _>>()?;
                Command::Propose { value }
            }
            other => {
                return Err(ScenarioError::Field { index, field: "op", reason: format!("unknown operation `{other}`") })
            }
        })
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.workload()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::parse(&text)
    }

    pub fn config(&self) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            n: self.n,
            t: self.t,
            seed: self.seed,
            delay: self.delay.into(),
            crashes: self.crashes.clone(),
            max_time: self.max_time.unwrap_or(d.max_time),
            stack: self.stack,
            relay: self.relay,
            registers: self.registers,
            ticks: self.ticks.unwrap_or(d.ticks),
            tick_gap: self.tick_gap.unwrap_or(d.tick_gap),
            shm_step: self.shm_step.unwrap_or(d.shm_step),
        }
    }

    pub fn workload(&self) -> Result<Workload, ScenarioError> {
        let entries = self
            .workload
            .iter()
            .enumerate()
            .map(|(i, w)| Ok(WorkloadEntry { time: w.time, proc: w.proc, command: w.command(i)? }))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(Workload::new(entries))
    }

    /// The same scenario under another seed.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
        n = 3
        t = 1
        stack = "snapshot"
        delay = { bounded = 10 }
        [[crashes]]
        proc = 3
        time = 5
        cut = 1
        [[workload]]
        time = 0
        proc = 1
        op = "write"
        args = [0, 5]
        [[workload]]
        time = 0
        proc = 2
        op = "snapshot"
    "#;

    #[test]
    fn parses_the_documented_shape() {
        let s = Scenario::parse(TEXT).unwrap();
        let c = s.config();
        assert_eq!(c.delay, DelayModel::Bounded { delta: 10 });
        assert_eq!(c.crashes[0].cut, Some(1));
        let w = s.workload().unwrap();
        assert_eq!(w.entries[0].command, Command::Write { reg: 0, value: 5 });
        assert_eq!(s.checks, vec![CheckKind::All]);
    }

    #[test]
    fn bad_arguments_name_the_entry() {
        let text = TEXT.replace("args = [0, 5]", "args = [0]");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.starts_with("workload[0].args"), "{err}");
    }

    #[test]
    fn toml_errors_carry_a_line() {
        let err = Scenario::parse("n = 3\nt = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
