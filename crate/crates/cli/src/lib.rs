//! `uxpipe` subcommands over the pipeline crates.

pub mod arena;
pub mod bench;
pub mod config;
mod error;
pub mod io;
pub mod pipeline;
pub mod sim;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "uxpipe", version, about = "Usability-assessment agent pipeline")]
pub struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Parallel workers for subcommands that iterate over sites or rollouts.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate simulated sites, optionally with defect variants.
    Simgen(sim::SimgenArgs),
    /// Serve one simulated site over the environment adapter protocol.
    Simserve(sim::SimserveArgs),
    /// Record usability-testing rollouts.
    Rollout(pipeline::RolloutArgs),
    /// Navigation metrics and filter verdict per archived rollout.
    ScoreTraces(pipeline::ScoreTracesArgs),
    /// Margin-calibrated targets, rewards and per-site selection.
    Calibrate(pipeline::CalibrateArgs),
    /// Sliding-window training examples from selected rollouts.
    Export(pipeline::ExportArgs),
    /// Score a preference-pair benchmark.
    Bench(bench::BenchArgs),
    /// Human preference arena.
    Arena(arena::ArenaArgs),
    /// Perceptual hash of an image as 16 hex digits.
    Hash(sim::HashArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simgen(_) => "simgen",
            Command::Simserve(_) => "simserve",
            Command::Rollout(_) => "rollout",
            Command::ScoreTraces(_) => "score-traces",
            Command::Calibrate(_) => "calibrate",
            Command::Export(_) => "export",
            Command::Bench(_) => "bench",
            Command::Arena(_) => "arena",
            Command::Hash(_) => "hash",
        }
    }
}

/// Run a parsed command line, writing reports to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let jobs = usize::from(cli.jobs);
    log::info!("{} resolved config: {} jobs={jobs}", cli.command.name(), cfg.echo());
    match cli.command {
        Command::Simgen(a) => sim::simgen(&cfg, a, jobs, out),
        Command::Simserve(a) => sim::simserve(&cfg, a, out),
        Command::Rollout(a) => pipeline::rollout(&cfg, a, jobs, out),
        Command::ScoreTraces(a) => pipeline::score_traces(&cfg, a, jobs, out),
        Command::Calibrate(a) => pipeline::calibrate(&cfg, a, out),
        Command::Export(a) => pipeline::export(&cfg, a, jobs, out),
        Command::Bench(a) => bench::bench(&cfg, a, out),
        Command::Arena(a) => arena::arena(&cfg, a, out),
        Command::Hash(a) => sim::hash(a, out),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
