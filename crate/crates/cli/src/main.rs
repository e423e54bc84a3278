mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use commands::Command;
use config::{ExperimentConfig, Overrides, UtilityChoice};

#[derive(Debug, Parser)]
#[command(name = "vmerton", version, about = "Rough-volatility Merton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Number of grid steps (overrides grid.n).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    utility: Option<UtilityChoice>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.common.config.clone() else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let ov = Overrides {
        out: cli.common.out,
        seed: cli.common.seed,
        paths: cli.common.paths,
        n: cli.common.n,
        utility: cli.common.utility,
        gamma: cli.common.gamma,
    };
    let result = ExperimentConfig::load(&config, &ov).and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
