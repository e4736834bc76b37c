mod commands;
mod config;
mod failure;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sortad::experiment::SweepAxis;

use config::{Overrides, RunConfig, SplitMode};
use failure::Failure;

/// Self-supervised anomaly detection for tabular data.
#[derive(Parser, Debug)]
#[command(name = "sortad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration. Flags below take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seeds to run (comma separated); replaces `run.seeds`.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,

    /// Name of the 0/1 label column.
    #[arg(long, global = true)]
    label_col: Option<String>,

    /// Alert fractions, e.g. `0.03,0.10`.
    #[arg(long, global = true, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,

    #[arg(long, global = true, value_enum)]
    split_mode: Option<SplitMode>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model per grid point and seed.
    Train,
    /// Score a CSV file with a fitted model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<out>/scores.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate models on the configured splits and aggregate across seeds.
    Evaluate {
        /// Model files; defaults to every model under `<out>/models`.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Vary one hyperparameter and record test performance across seeds.
    Sweep {
        /// num_transformations, num_temp_transformations or scoring_method.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: sortad::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let overrides = Overrides {
        seeds: cli.seed,
        label_col: cli.label_col,
        thresholds: cli.thresholds,
        split_mode: cli.split_mode,
        out: cli.out,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), overrides)?;
    match cli.command {
        Command::Train => commands::train(&cfg),
        Command::Score { model, input, output } => commands::score(&cfg, &model, &input, output.as_deref()),
        Command::Evaluate { models } => commands::evaluate(&cfg, &models),
        Command::Sweep { axis, values } => commands::sweep(&cfg, axis, &values).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sortad: {f}");
            ExitCode::from(f.kind.exit_code())
        }
    }
}
