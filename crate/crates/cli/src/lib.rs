//! Command-line driver: scenario files in, deterministic output directories out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Context;
pub use config::ScenarioConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "segmkt", version, about = "Segmented labor market model: solve, sweep, simulate, estimate")]
pub struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for stochastic commands, overriding the scenario file.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory, overriding the scenario file.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the [model] equilibrium.
    Solve,
    /// Solve over the [sweep] firing-cost grid and check the comparative statics.
    Sweep,
    /// Simulate a survey panel for the reform scenario.
    Simulate,
    /// Simulate, then estimate every configured outcome.
    Reform,
    /// Estimate every configured outcome on an existing panel file.
    Estimate {
        #[arg(long, value_name = "PATH")]
        panel: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::Reform => "reform",
            Command::Estimate { .. } => "estimate",
        }
    }
}

/// Runs one parsed command line; returns the committed output directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let config = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::parse("")?,
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("out/{}", cli.command.name())));
    let ctx = Context {
        config,
        seed: cli.seed,
        out,
    };
    let work = || match &cli.command {
        Command::Solve => commands::cmd_solve(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Reform => commands::cmd_reform(&ctx),
        Command::Estimate { panel } => commands::cmd_estimate(&ctx, panel),
    };
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}
