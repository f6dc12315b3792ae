use std::fs;
use std::io::BufReader;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use scd_broadcast::runner::{check, run_checked, sweep, verdict_lines, Checked, SeedSummary};
use scd_broadcast::scenario::{CheckKind, Scenario};
use scd_broadcast::sim::RunReport;
use scd_broadcast::trace::Trace;
use scd_broadcast::verify::{exit_code, CheckOptions};

#[derive(Clone, Debug)]
struct Seeds(Range<u64>);

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed `{x}`: {e}"));
        if let Some((a, b)) = s.split_once("..=") {
            Ok(Seeds(parse(a)?..parse(b)? + 1))
        } else if let Some((a, b)) = s.split_once("..") {
            Ok(Seeds(parse(a)?..parse(b)?))
        } else {
            let a = parse(s)?;
            Ok(Seeds(a..a + 1))
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Check {
    All,
    Scd,
    Lin,
    Sc,
    Lattice,
}

impl From<Check> for CheckKind {
    fn from(c: Check) -> Self {
        match c {
            Check::All => CheckKind::All,
            Check::Scd => CheckKind::Scd,
            Check::Lin => CheckKind::Lin,
            Check::Sc => CheckKind::Sc,
            Check::Lattice => CheckKind::Lattice,
        }
    }
}

/// Simulate a scenario (or load a stored trace), run the checkers, and write
/// trace.jsonl, metrics.json and verdicts.jsonl. Exits 1 iff a check fails.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, required_unless_present = "trace")]
    scenario: Option<PathBuf>,
    /// Check a stored trace instead of simulating.
    #[arg(long, conflicts_with_all = ["scenario", "seeds"])]
    trace: Option<PathBuf>,
    /// Seed sweep `A..B` (end exclusive) or `A..=B`, replacing the scenario seed.
    #[arg(long)]
    seeds: Option<Seeds>,
    /// Checkers to run; overrides the scenario's list.
    #[arg(long, value_enum, value_delimiter = ',')]
    check: Vec<Check>,
    /// Output directory.
    #[arg(long, default_value = "scdsim-out")]
    out: PathBuf,
    /// Simulation horizon, overriding the scenario.
    #[arg(long)]
    max_time: Option<u64>,
    /// Exhaustive bound on consistency-checked history length.
    #[arg(long, default_value_t = scd_broadcast::checkers::consistency::DEFAULT_MAX_OPS)]
    max_ops: usize,
}

fn print_verdicts(c: &Checked) {
    for v in &c.verdicts {
        println!("{v}");
    }
    for f in &c.metrics.flags {
        println!("FLAG {f}");
    }
}

fn print_report(r: &RunReport) {
    let mut line = format!("run ended at t={}", r.end_time);
    if r.hit_horizon {
        line.push_str(" (horizon reached)");
    }
    if !r.pending_ops.is_empty() {
        line.push_str(&format!(", {} operations pending at live processes", r.pending_ops.len()));
    }
    if !r.dropped.is_empty() {
        line.push_str(&format!(", {} operations addressed to crashed processes", r.dropped.len()));
    }
    println!("{line}");
}

fn write(c: &Checked, dir: &Path) -> Result<(), String> {
    c.write_to(dir).map_err(|e| format!("cannot write artifacts to {}: {e}", dir.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let checks: Vec<CheckKind> = cli.check.iter().map(|c| (*c).into()).collect();

    if let Some(path) = &cli.trace {
        let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let trace = Trace::read_jsonl(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
        let opts = CheckOptions { checks: if checks.is_empty() { vec![CheckKind::All] } else { checks }, max_ops: cli.max_ops, expect: None };
        let c = check(trace, RunReport::default(), &opts);
        print_verdicts(&c);
        fs::create_dir_all(&cli.out).map_err(|e| e.to_string())?;
        fs::write(cli.out.join(scd_broadcast::runner::VERDICTS_FILE), verdict_lines(&c.verdicts))
            .map_err(|e| e.to_string())?;
        return Ok(code(exit_code(&c.verdicts)));
    }

    let path = cli.scenario.as_ref().expect("clap requires --scenario without --trace");
    let mut scenario = Scenario::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(t) = cli.max_time {
        scenario.max_time = Some(t);
    }
    let opts = CheckOptions {
        checks: if checks.is_empty() { scenario.checks.clone() } else { checks },
        max_ops: cli.max_ops,
        expect: scenario.expect,
    };
    let workload = scenario.workload().map_err(|e| format!("{}: {e}", path.display()))?;
    if scenario.config().beyond_majority_resilience() {
        println!("NOTE t = {} >= n/2 = {}: outside the majority-resilience bound", scenario.t, scenario.n as f64 / 2.0);
    }

    let Some(Seeds(range)) = cli.seeds else {
        let c = run_checked(&scenario.config(), &workload, &opts).map_err(|e| format!("{}: {e}", path.display()))?;
        write(&c, &cli.out)?;
        print_report(&c.report);
        print_verdicts(&c);
        return Ok(code(exit_code(&c.verdicts)));
    };

    let results = sweep(range.clone(), |seed| {
        run_checked(&scenario.with_seed(seed).config(), &workload, &opts).map(|c| {
            let s = SeedSummary::of(seed, &c);
            let keep = (!s.failed.is_empty()).then_some(c);
            (s, keep)
        })
    });
    let mut summary = String::new();
    let (mut failed, mut starved) = (0, 0);
    for (seed, r) in &results {
        let (s, kept) = r.as_ref().map_err(|e| format!("seed {seed}: {e}"))?;
        summary.push_str(&serde_json::to_string(s).expect("summaries serialize"));
        summary.push('\n');
        starved += usize::from(s.expected_starvation);
        if let Some(c) = kept {
            failed += 1;
            println!("seed {seed}: FAIL {}", s.failed.join(", "));
            write(c, &cli.out.join(format!("seed-{seed}")))?;
        }
    }
    fs::create_dir_all(&cli.out).map_err(|e| e.to_string())?;
    fs::write(cli.out.join("summary.jsonl"), summary).map_err(|e| e.to_string())?;
    print!("{} seeds ({}..{}): {failed} failing", results.len(), range.start, range.end);
    if starved > 0 {
        print!(", {starved} EXPECTED-STARVATION");
    }
    println!();
    Ok(code(i32::from(failed > 0)))
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}
