//! Batch command-line pipeline: ingest, train, forecast, evaluate, plus a
//! synthetic-data generator and the clear-sky baseline.
//!
//! Every command takes `--config <path>` followed by any number of
//! `--dotted.name value` overrides of config fields. Exit codes: 0 success,
//! 2 data or format error, 3 fit failure, 4 alignment error.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{AnyModel, ModelKind, FORECAST_LEVELS};
pub use config::RunConfig;

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "solarcast", version, about = "Probabilistic solar irradiance forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides, `--dotted.name value` or `--dotted.name=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean the raw station CSV and report what was dropped.
    Ingest(Common),
    /// Fit a model on the train window and write it as JSON.
    Train {
        #[arg(value_enum)]
        kind: ModelKind,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Forecast every 15-minute step of the forecast window.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score forecast tables against observed targets.
    Evaluate {
        #[arg(long = "forecast", required = true)]
        forecasts: Vec<PathBuf>,
        /// Observations; defaults to `data_path`.
        #[arg(long)]
        actuals: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a seeded synthetic dataset in the canonical schema.
    Synth(Common),
    /// Clear-sky GHI/DNI over the forecast window.
    Clearsky(Common),
}

fn dispatch(command: Command) -> Result<Vec<PathBuf>> {
    let load = |c: &Common| RunConfig::load(c.config.as_deref(), &c.overrides);
    match command {
        Command::Ingest(c) => commands::ingest(&load(&c)?),
        Command::Train { kind, out, common } => commands::train(&load(&common)?, kind, out.as_deref()),
        Command::Forecast { model, out, common } => {
            commands::forecast(&load(&common)?, &model, out.as_deref())
        }
        Command::Evaluate {
            forecasts,
            actuals,
            common,
        } => commands::evaluate(&load(&common)?, &forecasts, actuals.as_deref()),
        Command::Synth(c) => commands::synth(&load(&c)?),
        Command::Clearsky(c) => commands::clearsky(&load(&c)?),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
