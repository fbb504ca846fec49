//! `unicity` command-line tool.
//!
//! Results go to standard output (JSON or CSV), diagnostics to standard
//! error. Exit codes: 0 success, 2 input error, 3 infeasible parameters,
//! 4 non-convergence.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "unicity", version, about = "Re-identification risk of set-valued datasets")]
pub struct Cli {
    /// Base seed for every randomized step.
    #[arg(long, global = true, env = "UNICITY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "UNICITY_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Dataset file: one record per line, items separated by commas or spaces.
    pub input: PathBuf,
    /// File of item tokens to remove before analysis.
    #[arg(long)]
    pub blacklist: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Precision {
    /// Maximum sampling error.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Confidence of the error bound.
    #[arg(long, default_value_t = 0.99)]
    pub sigma: f64,
    /// Chain steps per uniform sample.
    #[arg(long, default_value_t = unicity::sampler::DEFAULT_BURN_IN)]
    pub burn_in: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Uniform,
    Biased,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    PaperShaped,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record-size statistics as JSON.
    Stats {
        #[command(flatten)]
        input: Input,
    },
    /// Estimate the unicity of K-item subsets.
    Unicity {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k', long = "k", required_unless_present = "sweep_k")]
        k: Option<usize>,
        #[command(flatten)]
        precision: Precision,
        #[arg(long, value_enum, default_value = "uniform")]
        mode: ModeArg,
        /// Range `lo..hi` (inclusive); emits one CSV row per K.
        #[arg(long)]
        sweep_k: Option<String>,
    },
    /// Relative abundance distribution as CSV.
    Rad {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k', long = "k")]
        k: usize,
        /// Number of support buckets before the tail.
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[command(flatten)]
        precision: Precision,
    },
    /// Unicity against dataset size as CSV.
    Curve {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k', long = "k")]
        k: usize,
        /// Comma-separated sizes, or `start..end:step`.
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        precision: Precision,
    },
    /// Fit the exponential decay model to a curve CSV.
    Fit {
        /// CSV with `x` (size) and `y` (unicity) columns, as written by `curve`.
        curve: PathBuf,
        /// Normalization divisor for sizes.
        #[arg(long)]
        x_max: f64,
        /// Fraction of smallest sizes used for training.
        #[arg(long, default_value_t = 0.7)]
        split: f64,
        /// Power of x in the exponent.
        #[arg(long, default_value_t = 0.5)]
        exponent: f64,
        /// Write per-point predictions as CSV to this file.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        /// Zipf exponent of item popularity.
        #[arg(long)]
        exponent: Option<f64>,
        /// Lognormal location of record sizes.
        #[arg(long)]
        size_mu: Option<f64>,
        /// Lognormal scale of record sizes.
        #[arg(long)]
        size_sigma: Option<f64>,
        /// Write the dataset here instead of standard output.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
        /// Print expected statistics as JSON instead of generating.
        #[arg(long)]
        describe: bool,
        /// Print the generator settings as JSON instead of generating.
        #[arg(long)]
        print_spec: bool,
    },
    /// Geweke z-score traces of independent chains as CSV.
    Converge {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k', long = "k")]
        k: usize,
        #[arg(long, default_value_t = 20)]
        chains: usize,
        #[arg(long, default_value_t = unicity::sampler::DEFAULT_CHECK_EVERY)]
        check_every: usize,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Exact enumeration of all occurring K-subsets as CSV.
    Enumerate {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k', long = "k")]
        k: usize,
        #[arg(long, default_value_t = unicity::oracle::DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Items shared by every record containing the given items.
    Homogeneity {
        #[command(flatten)]
        input: Input,
        /// Comma-separated item tokens.
        #[arg(long)]
        items: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match unicity::exec::with_workers(workers, || commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
