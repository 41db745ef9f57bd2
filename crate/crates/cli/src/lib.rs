//! Batch front end for `twpa-core`: TOML configuration, linear / gain /
//! sweep runs writing CSV files, and Touchstone utilities.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use twpa_core::touchstone::DataFormat;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "twpa", version, about = "JTWPA linear and harmonic-balance gain simulation")]
pub struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file; every key is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pump-off S-parameters of the assembled device.
    Linear(RunArgs),
    /// Pump solve followed by small-signal gain.
    Gain(RunArgs),
    /// Gain over a grid of pump frequency and power offsets.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Pump frequency offsets in Hz, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        df_list: Vec<f64>,
        /// Pump power offsets in dB, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        dp_list: Vec<f64>,
    },
    /// Touchstone v1 utilities.
    #[command(subcommand)]
    Touchstone(TouchstoneCommand),
}

#[derive(Debug, Subcommand)]
pub enum TouchstoneCommand {
    /// Print port count, grid and format.
    Info { path: PathBuf },
    /// Rewrite a file in another data format.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "RI")]
        format: DataFormat,
        /// Significant digits.
        #[arg(long, default_value_t = 12)]
        precision: usize,
    },
    /// Report the max relative parse-write-parse error.
    Roundtrip {
        path: PathBuf,
        #[arg(long, default_value = "RI")]
        format: DataFormat,
        #[arg(long, default_value_t = 12)]
        precision: usize,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Linear(a) => commands::cmd_linear(&config::load(a.config.as_deref(), a.out.as_deref())?),
        Command::Gain(a) => commands::cmd_gain(&config::load(a.config.as_deref(), a.out.as_deref())?),
        Command::Sweep { run, df_list, dp_list } => {
            let cfg = config::load(run.config.as_deref(), run.out.as_deref())?;
            commands::cmd_sweep(&cfg, &df_list, &dp_list)
        }
        Command::Touchstone(t) => match t {
            TouchstoneCommand::Info { path } => {
                println!("{}", commands::touchstone_info(&path)?);
                Ok(())
            }
            TouchstoneCommand::Convert { input, output, format, precision } => {
                commands::touchstone_convert(&input, &output, format, precision)
            }
            TouchstoneCommand::Roundtrip { path, format, precision } => {
                let e = commands::touchstone_roundtrip(&path, format, precision)?;
                println!("max relative error {e:.3e}");
                Ok(())
            }
        },
    }
}
