//! Command-line front end: scenario runs, chirped spectra, extraction, eye
//! folding and solver benchmarks, all driven by JSON files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ringmod", version, about = "Microring/microdisk modulator compact model")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Worker threads for sweeps and fits (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the PRBS seed of the input.
    #[arg(long, global = true)]
    pub seed: Option<u32>,
    /// Validate inputs and stop before computing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transient run of a scenario: trace.csv and summary.json.
    Simulate(SimulateArgs),
    /// Chirped-laser spectra at several biases or heater powers.
    SweepFcm(SweepArgs),
    /// Model card extraction from a measurement manifest.
    Fit(FitArgs),
    /// Eye diagram and metrics of a trace file.
    Eye(EyeArgs),
    /// Adaptive versus fixed-step solver on one scenario.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Model card JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Keep every n-th trace row.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep specification JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Measurement manifest JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EyeArgs {
    /// Trace CSV written by `simulate`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Eye settings JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Adaptive,
    /// Fixed tick with voltage-dependent junction capacitance.
    Baseline,
    /// Fixed tick with the junction capacitance frozen at zero bias.
    BaselineConstCj,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "adaptive")]
    pub solver_a: SolverKind,
    #[arg(long, value_enum, default_value = "baseline")]
    pub solver_b: SolverKind,
    /// Tick of the fixed-step solvers (s).
    #[arg(long, default_value_t = 100e-15)]
    pub baseline_dt: f64,
    /// Tick of an additional fine baseline run used as accuracy reference.
    #[arg(long)]
    pub reference_dt: Option<f64>,
    /// Comparison grid points per unit interval.
    #[arg(long, default_value_t = 64)]
    pub grid_per_ui: usize,
}

pub(crate) fn info(g: &GlobalOpts, msg: impl AsRef<str>) {
    if g.verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(CliError::input("--jobs must be at least 1"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate::run(&cli.global, a),
        Command::SweepFcm(a) => commands::sweep::run(&cli.global, a),
        Command::Fit(a) => commands::fit::run(&cli.global, a),
        Command::Eye(a) => commands::eye::run(&cli.global, a),
        Command::Bench(a) => commands::bench::run(&cli.global, a),
    }
}
