//! `attacklab`: run decision-based attacks, gradient-estimation sweeps and
//! theory checks, writing CSV and JSON artifacts.
//!
//! Exit codes: 0 pass, 1 failed check, 2 configuration error, 3 transport
//! error, 4 violated precondition.

mod attack;
mod common;
mod error;
mod estimate;
mod output;
mod theory;
mod victim;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Status;

#[derive(Debug, Parser)]
#[command(name = "attacklab", version, about = "Projection-based decision attacks and estimator checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Victim model utilities.
    #[command(subcommand)]
    Victim(victim::VictimCommand),
    /// Run targeted attacks on one or more pairs.
    Attack(attack::AttackArgs),
    /// Mean cosine of gradient estimates against the true gradient.
    Estimate(estimate::EstimateArgs),
    /// Closed-form and Monte Carlo checks.
    #[command(subcommand)]
    Theory(theory::TheoryCommand),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Config.into() } else { Status::Pass.into() };
        }
    };
    let result = match cli.command {
        Command::Victim(cmd) => victim::run(cmd),
        Command::Attack(args) => attack::run(args),
        Command::Estimate(args) => estimate::run(args),
        Command::Theory(cmd) => theory::run(cmd),
    };
    match result {
        Ok(status) => status.into(),
        Err(e) => {
            log::error!("{e}");
            e.status().into()
        }
    }
}
