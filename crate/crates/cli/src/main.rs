//! `rcstab`: stability regions and training error of reservoir computers.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Context, Format};
use error::CliError;

#[derive(Parser)]
#[command(name = "rcstab", version, about = "Lyapunov stability regions and training error of reservoir computers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sections.
    #[arg(long, value_name = "N", env = "RCSTAB_THREADS")]
    threads: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Classify stability and compute the certified radius c_max.
    Analyze(Common),
    /// Drive, fit the readout and report the training error.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also write the regression matrix as omega.csv.
        #[arg(long)]
        dump_omega: bool,
    },
    /// Run a parameter-grid experiment.
    Sweep(Common),
    /// Map the basin of attraction of a 2-node reservoir.
    Basin(Common),
    /// Export the configured drive/target trajectory.
    Signal(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Analyze(c) | Command::Sweep(c) | Command::Basin(c) | Command::Signal(c) => c,
        Command::Train { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context { config: common.config.clone(), out: common.out.clone(), seed: common.seed, format: common.format };
    match cli.command {
        Command::Analyze(_) => commands::analyze(&ctx),
        Command::Train { dump_omega, .. } => commands::train_cmd(&ctx, dump_omega),
        Command::Sweep(_) => commands::sweep_cmd(&ctx),
        Command::Basin(_) => commands::basin_cmd(&ctx),
        Command::Signal(_) => commands::signal_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
