//! `pwcm`: batch front end for the piecewise collision-model simulator.
//!
//! Exit codes: 0 all checks pass, 1 an invariant check failed, 2 the
//! configuration is invalid, 3 a file could not be read or written.

mod config;
mod converge;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use piecewise_cm::verify::{run_verify_suite, VerifyOptions};

use crate::config::Scenario;
use crate::output::{sha256_hex, Check, OutputDir, RunReport, Timings};

const SCHEMA: &str = include_str!("../scenario.schema.json");
const DEFAULT_OUT: &str = "pwcm-out";

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "pwcm", version, about = "Collision models with memory and their continuum limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides the scenario's `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every stochastic run (overrides the scenario's `seed`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for trajectory and sweep parallelism.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Replace the memory-ancilla swap by a corrupted operator (test fixture).
    #[arg(long, hide = true)]
    fixture_corrupt_swap: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engines and evaluators listed in a scenario.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the structural identity suite on random instances.
    Verify {
        /// Random instances per identity check.
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the τ-sweep and grid-halving studies of a scenario.
    Converge {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Schema("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(e.to_string()))?;
    }
    Ok(())
}

fn out_dir(common: &Common, scenario: Option<&Scenario>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| scenario.and_then(|s| s.config.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn finish(mut report: RunReport, timings: Timings, out: &OutputDir) -> Result<bool, CliError> {
    report.finish();
    out.write_json("report.json", &report)?;
    out.write_json("timings.json", &timings)?;
    for c in &report.checks {
        let tag = if c.skipped {
            "SKIP"
        } else if c.passed {
            "PASS"
        } else {
            "FAIL"
        };
        println!("[{tag}] {}: {:.3e} (tol {:.1e}) {}", c.name, c.value, c.tolerance, c.detail);
    }
    for r in report.runs.iter().filter(|r| r.status != "ok") {
        println!("[FAIL] run {}: {}", r.id, r.status);
    }
    println!(
        "{} -> {}",
        if report.passed { "all checks passed" } else { "some checks failed" },
        out.dir.join("report.json").display()
    );
    Ok(report.passed)
}

fn scenario_command(config: &Path, common: &Common, converge: bool) -> Result<bool, CliError> {
    set_threads(common.threads)?;
    let scenario = Scenario::load(config, common.seed)?;
    let out = OutputDir::create(&out_dir(common, Some(&scenario)))?;
    let mut timings = Timings::default();
    let report = if converge {
        converge::cmd_converge(&scenario, &out, &mut timings)?
    } else {
        run::cmd_run(&scenario, common.fixture_corrupt_swap, &out, &mut timings)?
    };
    finish(report, timings, &out)
}

fn verify_command(draws: usize, common: &Common) -> Result<bool, CliError> {
    set_threads(common.threads)?;
    if draws == 0 {
        return Err(CliError::Schema("--draws must be positive".into()));
    }
    let seed = common.seed.unwrap_or(0);
    let provenance = format!(
        "verify seed={seed} draws={draws} corrupt_swap={}",
        common.fixture_corrupt_swap
    );
    let out = OutputDir::create(&out_dir(common, None))?;
    let mut report = RunReport::new("verify", &sha256_hex(provenance.as_bytes()), None, Some(seed));
    let start = std::time::Instant::now();
    let results = run_verify_suite(
        seed,
        VerifyOptions {
            corrupt_swap: common.fixture_corrupt_swap,
            draws,
        },
    );
    match results {
        Ok(results) => report.checks.extend(
            results
                .into_iter()
                .map(|r| Check::at_most(r.name, r.value, r.tolerance, r.detail)),
        ),
        Err(e) => report.checks.push(Check::flag("verify", false, format!("error: {e}"))),
    }
    let timings = Timings {
        seconds: vec![("verify".into(), start.elapsed().as_secs_f64())],
    };
    finish(report, timings, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, common } => scenario_command(config, common, false),
        Command::Converge { config, common } => scenario_command(config, common, true),
        Command::Verify { draws, common } => verify_command(*draws, common),
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pwcm: {e}");
            ExitCode::from(e.code())
        }
    }
}
