//! Reproducible command-line experiments on top of `pidp-core`.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use commands::{Command, ExitError, Outcome, Run};

#[derive(Debug, Parser)]
#[command(
    name = "pidp",
    version,
    about = "Controllability experiments for the inverted double pendulum"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config entry, e.g. `--set params.m1=2` or `--set state=[0,0,0,0]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    /// Run even when the parameters violate an admissibility condition.
    #[arg(long, global = true)]
    pub force_inadmissible: bool,

    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Check positivity and admissibility of the parameters.
    CheckParams,
    /// Evaluate f, h, Δ, X1..X4 and the notation components at `state`.
    Fields,
    /// Sweep the state space for Lie rank and strata.
    RankMap,
    /// Integrate the controlled system.
    Simulate,
    /// Poisson recurrence experiment for the uncontrolled system.
    Recur,
    /// Orbit and attainable-set point clouds.
    Cloud,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::CheckParams => Command::CheckParams,
            CliCommand::Fields => Command::Fields,
            CliCommand::RankMap => Command::RankMap,
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Recur => Command::Recur,
            CliCommand::Cloud => Command::Cloud,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (config, resolved) = config::load(cli.config.as_deref(), &cli.set)
        .map_err(|e| ExitError::new(commands::EXIT_CONFIG, format!("{e:#}")))?;
    Run {
        command: cli.command.into(),
        config,
        resolved,
        force_inadmissible: cli.force_inadmissible,
    }
    .execute()
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<ExitError>()
        .map(|e| e.code)
        .unwrap_or(commands::EXIT_CONFIG)
}
