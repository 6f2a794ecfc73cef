//! Command-line front end for the fairlot consensus simulator.
//!
//! `run` executes a TOML scenario and prints a per-experiment summary,
//! `sweep` builds a one-parameter scenario on the fly, and `check-safety`
//! re-audits an exported event log. Every command exits nonzero if the
//! runs it performed (or the log it audited) contain safety violations.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fairlot::harness::{
    check_safety, emit_results, run_replicate_traced, run_scenario, scenario_from_toml,
    summarize, summary_table, ExecMode, ExperimentConfig, ReplicateResult,
};
use fairlot::netsim::{BehaviorSet, EventLog};

#[derive(Parser)]
#[command(name = "fairlot", version, about = "Deterministic consensus network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every experiment in a scenario file.
    Run {
        /// Scenario TOML with one or more [[experiment]] tables.
        #[arg(long)]
        scenario: PathBuf,
        /// Override every experiment's base RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override every experiment's replicate count.
        #[arg(long)]
        replicates: Option<u32>,
        /// Write per-replicate results as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export every replicate's event log ('#'-headed sections).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Run replicates on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Recount safety violations in an exported event log.
    CheckSafety {
        /// Log file; '#'-headed sections are audited independently.
        #[arg(long)]
        log: PathBuf,
    },
    /// Run a scenario sweeping one parameter over a list of values.
    ///
    /// Sweeping node-count keeps the network honest; sweeping
    /// malicious-fraction arms all attack behaviors on the malicious set.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values for the swept parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Network size (used when sweeping malicious-fraction).
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        replicates: u32,
        #[arg(long, default_value_t = 600_000)]
        duration_ms: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write per-replicate results as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run replicates on a single thread.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    NodeCount,
    MaliciousFraction,
}

fn main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run {
            scenario,
            seed,
            replicates,
            out,
            trace,
            sequential,
        } => {
            let text = fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let mut exps = scenario_from_toml(&text)?;
            for exp in &mut exps {
                if let Some(s) = seed {
                    exp.base_seed = s;
                }
                if let Some(r) = replicates {
                    exp.replicates = r;
                }
            }
            let rows = match trace {
                None => run_scenario(&exps, exec_mode(sequential))?,
                Some(path) => run_traced(&exps, &path)?,
            };
            finish(&rows, out)
        }
        Cmd::CheckSafety { log } => {
            let text =
                fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let mut violations = 0;
            for section in split_sections(&text) {
                let parsed = EventLog::parse(section).context("parsing event log")?;
                violations += check_safety(&parsed);
            }
            println!("{violations} safety violations");
            Ok(exit_for(violations))
        }
        Cmd::Sweep {
            param,
            values,
            nodes,
            replicates,
            duration_ms,
            seed,
            out,
            sequential,
        } => {
            let mut exps = Vec::new();
            for &v in &values {
                let mut exp = ExperimentConfig {
                    replicates,
                    duration_ms,
                    base_seed: seed,
                    ..ExperimentConfig::default()
                };
                match param {
                    SweepParam::NodeCount => {
                        if v.fract() != 0.0 || v < 1.0 {
                            bail!("node-count value {v} is not a positive integer");
                        }
                        exp.node_count = v as usize;
                        exp.id = format!("sweep-n{}", v as usize);
                    }
                    SweepParam::MaliciousFraction => {
                        exp.node_count = nodes;
                        exp.malicious_fraction = v;
                        exp.behaviors = BehaviorSet::all();
                        exp.id = format!("sweep-f{v}");
                    }
                }
                exps.push(exp);
            }
            let rows = run_scenario(&exps, exec_mode(sequential))?;
            finish(&rows, out)
        }
    }
}

fn exec_mode(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

/// Run replicates one by one, exporting each event log under a '#' header.
fn run_traced(exps: &[ExperimentConfig], path: &PathBuf) -> Result<Vec<ReplicateResult>> {
    let mut rows = Vec::new();
    let mut dump = String::new();
    for exp in exps {
        exp.validate()?;
        for k in 0..exp.replicates {
            let (row, log) = run_replicate_traced(exp, k)?;
            writeln!(dump, "# {} replicate {k}", exp.id)?;
            dump.push_str(&log.export_lines());
            rows.push(row);
        }
    }
    fs::write(path, dump).with_context(|| format!("writing {}", path.display()))?;
    Ok(rows)
}

/// Sections of a trace file, delimited by '#'-prefixed header lines.
/// Empty sections parse to empty logs, so headers at the start (or
/// back-to-back) are harmless.
fn split_sections(text: &str) -> Vec<&str> {
    let mut sections = Vec::new();
    let mut start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.starts_with('#') {
            sections.push(&text[start..offset]);
            start = offset + line.len();
        }
        offset += line.len();
    }
    sections.push(&text[start..]);
    sections
}

fn finish(rows: &[ReplicateResult], out: Option<PathBuf>) -> Result<ExitCode> {
    print!("{}", summary_table(&summarize(rows)));
    if let Some(path) = out {
        fs::write(&path, emit_results(rows))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let violations: u64 = rows.iter().map(|r| r.metrics.safety_violations).sum();
    if violations > 0 {
        eprintln!("{violations} safety violations detected");
    }
    Ok(exit_for(violations))
}

fn exit_for(violations: u64) -> ExitCode {
    if violations > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
