mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Optimal design of experiments for qubit channels.
#[derive(Debug, Parser)]
#[command(name = "qdoe", version, about)]
pub struct Cli {
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical and SLD quantum Fisher information of a (mixed) Pauli design.
    Fisher(FisherArgs),
    /// Optimal relative frequencies of Pauli designs under a criterion.
    OptimalDesign(OptimalArgs),
    /// Analytic optimum of a two-design problem.
    BinaryDesign(BinaryArgs),
    /// Static-versus-adaptive Monte Carlo sweeps and figure data.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Channel family: scaling, pauli or asymmetry.
    #[arg(long)]
    pub family: Option<String>,

    /// Channel parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,

    /// Asymmetry coordinates ε1,ε2 (implies --family asymmetry).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,

    /// Pauli axes of the candidate designs.
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Relative frequencies of the designs; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CriterionArgs {
    /// A, D, E, c, gamma, or compound:P:X:Y.
    #[arg(long, default_value = "A")]
    pub criterion: String,

    #[arg(long)]
    pub gamma: Option<f64>,

    /// Weight matrix, rows separated by ';' (e.g. "1,0;0,0").
    #[arg(long, allow_hyphen_values = true)]
    pub weight: Option<String>,

    /// Vector for the c-criterion.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub c_vector: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub criterion: CriterionArgs,

    /// Compare with the closed-form optimum where one is known.
    #[arg(long)]
    pub closed_form: bool,

    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BinaryArgs {
    /// Asymmetry coordinates ε1,ε2; the designs are the axis-1 and axis-2 settings.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,

    /// First Fisher matrix, rows separated by ';'.
    #[arg(long, allow_hyphen_values = true)]
    pub j1: Option<String>,

    /// Second Fisher matrix, rows separated by ';'.
    #[arg(long, allow_hyphen_values = true)]
    pub j2: Option<String>,

    /// A or D.
    #[arg(long, default_value = "A")]
    pub criterion: String,

    /// Weight matrix for the A-criterion; diag(1,0) for --eps, identity otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub weight: Option<String>,

    /// Cross-check against a dense λ grid.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON or TOML file with keys N, K, runway, step, replicas, seed, grid_step, low_noise_only.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// 1: Pauli-QPT versus two-design surface; 3: MSE-ratio sweep; 4: the four runway panels.
    #[arg(long)]
    pub figure: Option<u8>,

    #[arg(long = "N")]
    pub n_total: Option<u64>,

    #[arg(long = "K")]
    pub k_steps: Option<usize>,

    #[arg(long)]
    pub runway: Option<u64>,

    #[arg(long)]
    pub replicas: Option<usize>,

    #[arg(long)]
    pub grid_step: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Keep only points with 1 − ε2 ≤ 0.5.
    #[arg(long)]
    pub low_noise_only: bool,

    /// Simulate a single point θ1,θ2 instead of a grid.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,

    /// Simulate a single point ε1,ε2 instead of a grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.tag(), e);
            ExitCode::from(e.exit_code())
        }
    }
}
