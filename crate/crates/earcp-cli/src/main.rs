//! Command-line entry point: `earcp run|simulate|sweep|replay`.
//!
//! Every validation failure is printed to stderr, one problem per line, and
//! the process exits non-zero.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use earcp::LossKind;
use earcp_cli::config::{parse_config, ExperimentConfig};
use earcp_cli::runner;

#[derive(Debug, Parser)]
#[command(name = "earcp", version, about = "Streaming ensemble-weighting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every aggregator in the config over its stream and write traces
    /// plus a summary.
    Run(RunArgs),
    /// Write the config's synthetic stream as CSV, one file per seed,
    /// without running any aggregator.
    Simulate(RunArgs),
    /// Expand the [grid] section and run every cell; the config must have a
    /// grid.
    Sweep(RunArgs),
    /// Resume a session from a snapshot and feed it a CSV stream.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the TOML experiment config.
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-file progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Snapshot JSON written by a previous session.
    snapshot: PathBuf,
    /// CSV stream to continue with, in the long `step,expert_id,...` layout.
    csv: PathBuf,
    /// Loss to score with: "sq", "zero_one" or "xent".
    #[arg(long, default_value = "zero_one")]
    loss: String,
    /// Squared-error normalization bound (only with --loss sq).
    #[arg(long, default_value_t = 1.0)]
    loss_bound: f64,
    /// Cross-entropy probability clip (only with --loss xent).
    #[arg(long, default_value_t = 0.01)]
    loss_clip: f64,
    /// Seed for coherence peer sampling in the restored session.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the replayed trace and final state.
    #[arg(long, default_value = "replay_out")]
    out: PathBuf,
    /// Suppress per-file progress lines.
    #[arg(long)]
    quiet: bool,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Vec<String>> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| vec![format!("reading {}: {e}", args.config.display())])?;
    let mut config = parse_config(&text).map_err(|errors| {
        errors
            .into_iter()
            .map(|e| format!("{}: {e}", args.config.display()))
            .collect::<Vec<_>>()
    })?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn parse_replay_loss(args: &ReplayArgs) -> Result<LossKind, Vec<String>> {
    let kind = match args.loss.as_str() {
        "sq" => LossKind::ScaledSquaredError {
            bound: args.loss_bound,
        },
        "zero_one" => LossKind::ZeroOneArgmax,
        "xent" => LossKind::ClippedCrossEntropy {
            clip: args.loss_clip,
        },
        other => {
            return Err(vec![format!(
                "--loss: unknown kind \"{other}\", expected \"sq\", \"zero_one\" or \"xent\""
            )]);
        }
    };
    kind.validate().map_err(|e| vec![format!("--loss: {e}")])?;
    Ok(kind)
}

fn dispatch(cli: Cli) -> Result<(), Vec<String>> {
    let run_error = |e: anyhow::Error| vec![format!("{e:#}")];
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            runner::run_experiment(&config, args.quiet).map_err(run_error)?;
        }
        Command::Simulate(args) => {
            let config = load_config(&args)?;
            runner::simulate_streams(&config, args.quiet).map_err(run_error)?;
        }
        Command::Sweep(args) => {
            let config = load_config(&args)?;
            runner::sweep(&config, args.quiet).map_err(run_error)?;
        }
        Command::Replay(args) => {
            let loss = parse_replay_loss(&args)?;
            runner::replay(
                &args.snapshot,
                &args.csv,
                loss,
                args.seed,
                &args.out,
                args.quiet,
            )
            .map_err(run_error)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(errors) => {
            for error in errors {
                eprintln!("error: {error}");
            }
            ExitCode::FAILURE
        }
    }
}
