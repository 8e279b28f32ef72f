use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nullframe_cli::{parse_config, run, CliError, Config, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "nullframe", version, about = "Certification, evolution and estimate runs for weighted wave energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random test family (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Run at K grid resolutions N, 1.5N, 2N, ...
    #[arg(long, value_name = "K")]
    refine: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identity suite.
    Certify(Common),
    /// Weighted conservation budgets with refinement orders.
    Conserve(Common),
    /// Evolve and record energy time series.
    Evolve(Common),
    /// Energy estimate terms and implied constants.
    Estimate(Common),
    /// Commutator bound, decoupling and decay constants on a test family.
    Commutator(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Certify(c) => (Mode::Certify, c),
        Command::Conserve(c) => (Mode::Conserve, c),
        Command::Evolve(c) => (Mode::Evolve, c),
        Command::Estimate(c) => (Mode::Estimate, c),
        Command::Commutator(c) => (Mode::Commutator, c),
    };
    let cfg: Result<Config, CliError> = match &common.config {
        Some(p) => parse_config(p),
        None => Ok(Config::default()),
    };
    let opts = RunOptions { out: common.out, seed: common.seed, refine: common.refine };
    let result = cfg.and_then(|cfg| run(mode, &cfg, &opts));
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            // config errors never reach the output directory, so report them here too
            eprintln!("{e}");
            let record = e.record(Some(mode));
            println!("{}", serde_json::to_string(&record).unwrap_or_default());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
