//! `cjmle`: fit, simulate, cross-validate and evaluate CJMLE factor models
//! from CSV files.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input error, 3 fit stopped
//! at the iteration limit.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cjmle::crossval::CvCriterion;
use cjmle::optimizer::InitStrategy;
use cjmle::simulate::ThetaLaw;
use cjmle::LinkFunction;

#[derive(Debug, Parser)]
#[command(name = "cjmle", version, about = "Constrained joint maximum likelihood for exploratory item factor analysis")]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a K-factor model to a response CSV.
    Fit(FitArgs),
    /// Generate a synthetic dataset and its true parameters.
    Simulate(SimulateArgs),
    /// Choose K by entry-wise cross-validation.
    Cv(CvArgs),
    /// Compare estimated parameters with true ones.
    Evaluate(EvaluateArgs),
}

/// Optimizer settings shared by `fit` and `cv`.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Constraint radius C (default 5√K).
    #[arg(long = "c-radius")]
    pub c_radius: Option<f64>,
    #[arg(long, default_value_t = LinkFunction::Logit)]
    pub link: LinkFunction,
    /// Relative objective change that stops the iteration.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = 1000)]
    pub max_iters: usize,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every random choice (generated and recorded when absent).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_init, default_value = "spectral")]
    pub init: InitStrategy,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Response CSV: header of item ids, leading person-id column, cells 0/1/NA.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Number of latent factors.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the standardized solution instead of the raw estimate.
    #[arg(long)]
    pub standardize: bool,
    /// Exit 0 even if the iteration limit was reached.
    #[arg(long = "allow-nonconverged")]
    pub allow_nonconverged: bool,
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of items J.
    #[arg(long)]
    pub j: usize,
    /// Persons per item τ (N = τJ).
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long)]
    pub k: usize,
    #[arg(long = "theta-law", default_value_t = ThetaLaw::TruncatedNormal)]
    pub theta_law: ThetaLaw,
    /// Probability that a cell is observed (1 = no missing cells).
    #[arg(long = "missing-rate", default_value_t = 1.0)]
    pub missing_rate: f64,
    #[arg(long, default_value_t = LinkFunction::Logit)]
    pub link: LinkFunction,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Candidate factor counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = cjmle::crossval::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = CvCriterion::SquaredError)]
    pub criterion: CvCriterion,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory with theta.csv, loadings.csv and intercepts.csv.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Directory with truth_theta.csv, truth_loadings.csv and
    /// truth_intercepts.csv (plain names are accepted too).
    #[arg(long)]
    pub truth: PathBuf,
    /// Link used for the probability recovery error.
    #[arg(long, default_value_t = LinkFunction::Logit)]
    pub link: LinkFunction,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn parse_init(s: &str) -> Result<InitStrategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "spectral" => Ok(InitStrategy::Spectral),
        "zero" => Ok(InitStrategy::Zero),
        other => Err(format!("unknown init `{other}` (expected spectral or zero)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(cli.log).format_timestamp(None).init();

    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Cv(args) => commands::cv(args),
        Command::Evaluate(args) => commands::evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
