//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode, Overrides};
use crate::error::HarnessError;
use crate::run::run_config;

#[derive(Debug, Parser)]
#[command(name = "gpett", version, about = "GP extended object tracking experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recursive versus batch GP regression on a 1-D function.
    RegressDemo(Common),
    /// One simulated run per scenario with ground truth, scans and estimates.
    Simulate(Common),
    /// Track a recorded scan file.
    Track(DataArgs),
    /// Monte Carlo comparison of the filter and the smoother.
    Benchmark(Common),
    /// Track recorded scans and score them against optional ground truth.
    RealData(DataArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo runs per scenario.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Smoother lag in scans.
    #[arg(long)]
    pub lag: Option<usize>,
    /// Enable the fixed-lag smoother.
    #[arg(long)]
    pub smoother: bool,
    /// Worker threads; 0 uses every available core.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Scan CSV (frame_id, time_s, x_m, y_m).
    #[arg(long)]
    pub scans: Option<PathBuf>,
    /// Truth CSV (frame_id, time_s, cx, cy, vx, vy, psi).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Truth contour CSV (frame_id, x_m, y_m).
    #[arg(long)]
    pub contours: Option<PathBuf>,
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        out: c.out.clone(),
        runs: c.runs,
        lag: c.lag,
        smoother: c.smoother,
        workers: c.workers,
        ..Overrides::default()
    }
}

impl Command {
    fn resolve(&self) -> (Mode, &Common, Overrides) {
        match self {
            Command::RegressDemo(c) => (Mode::RegressDemo, c, overrides(c)),
            Command::Simulate(c) => (Mode::Simulate, c, overrides(c)),
            Command::Benchmark(c) => (Mode::Benchmark, c, overrides(c)),
            Command::Track(d) | Command::RealData(d) => {
                let mode = if matches!(self, Command::Track(_)) {
                    Mode::Track
                } else {
                    Mode::RealData
                };
                let ov = Overrides {
                    scans: d.scans.clone(),
                    truth: d.truth.clone(),
                    contours: d.contours.clone(),
                    ..overrides(&d.common)
                };
                (mode, &d.common, ov)
            }
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let (mode, common, ov) = cli.command.resolve();
    let result = ExperimentConfig::load(mode, common.config.as_deref(), &ov).and_then(|cfg| run_config(&cfg));
    match result {
        Ok(art) => {
            for f in &art.files {
                println!("{}", f.display());
            }
            for n in &art.notes {
                eprintln!("note: {n}");
            }
            0
        }
        Err(e) => report(&e),
    }
}

fn report(e: &HarnessError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
