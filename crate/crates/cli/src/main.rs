#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Output, RunConfig, StepSpec};
use sdde_lab::ScenarioId;

#[derive(Parser)]
#[command(name = "sdde-lab", version, about = "Simulate and check comparison properties of delay equations with jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write reports.
    Run(RunArgs),
    /// List built-in scenarios.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario id.
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<ScenarioId>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_paths: Option<u64>,
    /// Step size, "tau/n" or a number dividing tau.
    #[arg(long)]
    dt: Option<StepSpec>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ordering tolerance; defaults to 0 for jump-only systems and dt otherwise.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, env = "SDDE_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated artifacts to write.
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Option<Vec<Output>>,
    /// Highest tower iterate.
    #[arg(long)]
    tower_level: Option<usize>,
    /// Number of leading paths exported with `--emit paths`.
    #[arg(long)]
    path_exports: Option<usize>,
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|e: sdde_lab::Error| e.to_string())
}

fn run(args: RunArgs) -> Result<run::Status> {
    let base = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        scenario: args.scenario,
        n_paths: args.n_paths,
        dt: args.dt,
        seed: args.seed,
        epsilon: args.epsilon,
        outputs: args.emit,
        output_dir: args.out,
        threads: args.threads,
        tower_level: args.tower_level,
        path_exports: args.path_exports,
        ..RunConfig::default()
    };
    let mut merged = flags.or(base);
    if args.scenario.is_some() {
        merged.problem = None;
    }
    let resolved = merged.validate()?;
    match resolved.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(|| run::execute(&resolved)),
        None => run::execute(&resolved),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for id in ScenarioId::ALL {
                println!("{:<16} {}", id.as_str(), id.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(run::Status::Clean) => ExitCode::SUCCESS,
            Ok(run::Status::ConditionFailed) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
