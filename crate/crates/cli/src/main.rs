//! Command-line entry point for the emissions counterfactual and coal-fleet
//! profitability pipeline.
//!
//! Subcommands map one-to-one onto pipeline stages; `report` chains all of
//! them. Every run is driven by a JSON config file, and every output embeds
//! the SHA-256 of that file plus the RNG seed, so artifacts are traceable
//! and reruns with unchanged inputs are byte-identical.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_counterfactual, cmd_ingest, cmd_market, cmd_report, CliError, RunContext};

#[derive(Parser)]
#[command(name = "gridcf", version, about = "Emissions counterfactual and coal-fleet profitability pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; defaults to `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TargetArgs {
    /// Comma-separated target series, overriding the config
    /// (e.g. `emissions,generation,intensity`).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Build national monthly series from plant-level records.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit counterfactual models and report monthly deviations.
    Counterfactual {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        targets: TargetArgs,
    },
    /// Price the fleet under both scenarios and classify at-risk units.
    Market {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the full pipeline and write a combined summary.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        targets: TargetArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { common } => {
            let ctx = RunContext::new(&common.config, common.seed, common.out)?;
            cmd_ingest(&ctx)?;
        }
        Command::Counterfactual { common, targets } => {
            let ctx = RunContext::new(&common.config, common.seed, common.out)?;
            let bundle = cmd_ingest(&ctx)?;
            cmd_counterfactual(&ctx, &bundle, targets.targets.as_deref())?;
        }
        Command::Market { common } => {
            let ctx = RunContext::new(&common.config, common.seed, common.out)?;
            cmd_market(&ctx)?;
        }
        Command::Report { common, targets } => {
            let ctx = RunContext::new(&common.config, common.seed, common.out)?;
            cmd_report(&ctx, targets.targets.as_deref())?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
