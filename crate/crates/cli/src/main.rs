//! `episcale`: command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (arguments, configuration, data
//! files), 2 failure while running.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "episcale", version, about = "Multi-scale epidemic modelling: fit, simulate, calibrate, project")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `seeds.dynamics`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sliding-window fit of β and λ₁ to H, U, D observations.
    Fit {
        #[command(flatten)]
        common: Common,
        /// `date,H,U,D` CSV; overrides `io.observations`.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Integrate the configured compartmental model.
    SimulateOde {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        days: Option<f64>,
    },
    /// One town run following the policy timeline.
    SimulateTown {
        #[command(flatten)]
        common: Common,
        /// GeoJSON buildings; overrides `io.buildings`.
        #[arg(long)]
        buildings: Option<PathBuf>,
        #[arg(long)]
        days: Option<u32>,
        /// Also write the end state of every resident.
        #[arg(long)]
        agents: bool,
    },
    /// Replicate ensemble under the initial policy.
    Replicates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        buildings: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        days: Option<u32>,
    },
    /// Exhaustive grid search against a target curve.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        buildings: Option<PathBuf>,
        /// `date,infected` CSV; overrides `io.target`.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Replicates per cell.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Run under the initial policy, then continue with and without the switch.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        buildings: Option<PathBuf>,
        /// Defaults to the second policy timeline entry.
        #[arg(long)]
        switch_date: Option<NaiveDate>,
        #[arg(long)]
        extra_days: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit, project, calibrate, switch policy and extract the effective β.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        observations: Option<PathBuf>,
        #[arg(long)]
        buildings: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

/// Error classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

pub trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::dispatch(cli.command, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Runtime(e)) = &f;
            // library errors often embed their source in the message already
            let mut text = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !text.contains(&c) {
                    text = format!("{text}: {c}");
                }
            }
            eprintln!("error: {text}");
            ExitCode::from(f.code())
        }
    }
}
