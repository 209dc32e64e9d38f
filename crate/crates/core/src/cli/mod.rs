//! Command-line surface: seven batch subcommands bound by one JSON config,
//! writing reproducible file outputs.
//!
//! Conventions: dates are ISO-8601 (`2025-03-19`), rates are decimals
//! (`0.045` for 4.5%), futures prices are exchange points (`95.75`). Every
//! command echoes its resolved configuration to `config.json` in the output
//! directory; rerunning from that file reproduces the outputs byte for
//! byte.

pub mod calibrate_cmd;
pub mod commands;
pub mod config;
pub mod fmt;
pub mod simulate_cmd;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::RunConfig;

const ABOUT: &str = "Term-structure engine for short rates with jumps at \
known times: decomposition diagnostics, futures pricing, curve calibration, \
and simulation.";

const AFTER_HELP: &str = "Conventions: dates ISO-8601, rates as decimals \
(0.045 = 4.5%), futures prices in exchange points. Every command reads one \
JSON --config and writes its outputs plus the resolved config.json into \
--out.";

#[derive(Parser, Debug)]
#[command(name = "shortrate", version, about = ABOUT, after_help = AFTER_HELP)]
pub struct Cli {
    /// JSON run configuration (required by every subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed override for any stochastic or optimizer work.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (created if missing). Defaults to ./out.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Split a fixing series into target, spike, and residual components.
    Decompose,
    /// Estimate the Hurst exponent of a daily series.
    Hurst,
    /// Fit curve levels, spikes, and spreads to futures quotes.
    Calibrate {
        /// Which stage to run: ff, sofr, or both.
        #[arg(long, value_name = "STAGE")]
        stage: Option<String>,
    },
    /// Price futures quotes under a model snapshot.
    Price,
    /// Simulate model paths and summarize them against closed forms.
    Simulate,
    /// Score curve-implied policy moves against realized ones by horizon.
    R2,
    /// Compute realized compounded term rates from fixings.
    Termrate,
}

/// Run a parsed invocation. Errors map onto process exit codes via
/// [`Error::exit_code`].
pub fn run(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| Error::invalid("a --config <file> is required"))?;
    let mut config = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    let out_dir = cli
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    config.out_dir = Some(out_dir.clone());

    match cli.command {
        Command::Decompose => commands::cmd_decompose(&mut config, &out_dir),
        Command::Hurst => commands::cmd_hurst(&mut config, &out_dir),
        Command::Calibrate { stage } => {
            calibrate_cmd::cmd_calibrate(&mut config, &out_dir, stage.as_deref())
        }
        Command::Price => commands::cmd_price(&mut config, &out_dir),
        Command::Simulate => simulate_cmd::cmd_simulate(&mut config, &out_dir),
        Command::R2 => commands::cmd_r2(&mut config, &out_dir),
        Command::Termrate => commands::cmd_termrate(&mut config, &out_dir),
    }
}

/// Entry point used by the binary: parse, run, translate errors to exit
/// codes.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
