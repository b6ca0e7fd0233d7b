use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{parse_count_pair, parse_pair, parse_triple};

/// Robust differentially private Bayesian linear regression.
#[derive(Parser)]
#[command(name = "privlr", version = privlr_core::VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean expression and response tables into per-drug dataset CSVs.
    Preprocess(PreprocessArgs),
    /// Choose the budget split and clipping multipliers on synthetic data.
    Tune(TuneArgs),
    /// Clip a dataset and release its noisy sufficient statistics.
    Release(ReleaseArgs),
    /// Fit a posterior from released (and optional non-private) statistics.
    Fit(FitArgs),
    /// Predict with a fitted posterior.
    Predict(PredictArgs),
    /// Run an evaluation experiment.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Accuracy as the private set grows.
    Curves(CvArgs),
    /// Grid over d, n_private, n_nonprivate and epsilon.
    Sweep(CvArgs),
    /// Error quantiles against n for one mechanism.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config file, or an artifact from a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    expression: Option<PathBuf>,
    #[arg(long)]
    responses: Option<PathBuf>,
    /// One gene id per line, highest priority first.
    #[arg(long)]
    gene_order: Option<PathBuf>,
    /// Keep the first k genes of the gene order.
    #[arg(long, alias = "genes")]
    dims: Option<usize>,
    /// Only these drugs (comma-separated).
    #[arg(long, value_delimiter = ',')]
    drugs: Option<Vec<String>>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_aux: Option<usize>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the split search and tune thresholds for this split.
    #[arg(long, value_parser = parse_triple)]
    split: Option<[f64; 3]>,
    /// Data sets and noise draws per candidate in the split search.
    #[arg(long, value_parser = parse_count_pair)]
    split_replicates: Option<[usize; 2]>,
    /// Data sets and noise draws for the final threshold search.
    #[arg(long, value_parser = parse_count_pair)]
    replicates: Option<[usize; 2]>,
    /// Split scoring: gibbs or fixed.
    #[arg(long)]
    scoring: Option<String>,
    #[arg(long)]
    gibbs_m: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Multiplier values used on both grid axes.
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<f64>>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ReleaseArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV (label, features..., target).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_triple)]
    split: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_pair, conflicts_with = "multipliers")]
    bounds: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair)]
    multipliers: Option<[f64; 2]>,
    /// Center and row-normalise features, center targets.
    #[arg(long)]
    preprocess: bool,
    /// Never written to the artifact; omit for a fresh random seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Release artifact or statistics JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Non-private dataset CSV whose exact statistics are added.
    #[arg(long)]
    nonprivate: Option<PathBuf>,
    /// fixed or gibbs.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Gamma hyperparameters a,b,a0,b0.
    #[arg(long, value_delimiter = ',')]
    hyper: Option<Vec<f64>>,
    #[arg(long)]
    gibbs_m: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Fit artifact.
    #[arg(long)]
    posterior: Option<PathBuf>,
    /// CSV with a label column; a trailing "target" column is scored.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    delimiter: Option<String>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV; synthetic data when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_private: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_nonprivate: Option<Vec<usize>>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_triple)]
    split: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_pair, conflicts_with_all = ["multipliers", "tune_thresholds"])]
    bounds: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, conflicts_with = "tune_thresholds")]
    multipliers: Option<[f64; 2]>,
    /// Tune multipliers per cell with this many data sets,noise draws.
    #[arg(long, value_parser = parse_count_pair)]
    tune_thresholds: Option<[usize; 2]>,
    /// Comma-separated method variants.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// fixed or gibbs.
    #[arg(long)]
    fit: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    hyper: Option<Vec<f64>>,
    #[arg(long)]
    gibbs_m: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    preprocess: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delimiter: Option<String>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// gaussian_mean_suffstat, gaussian_mean_input_perturbation or linreg_suffstat.
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    dims: Option<usize>,
    /// L1 bound of the Gaussian-mean mechanisms.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, value_parser = parse_pair)]
    bounds: Option<[f64; 2]>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_triple)]
    split: Option<[f64; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    format: Option<String>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Tune(a) => commands::tune(a),
        Command::Release(a) => commands::release(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Experiment(ExperimentCommand::Curves(a)) => commands::cv_experiment("experiment curves", a),
        Command::Experiment(ExperimentCommand::Sweep(a)) => commands::cv_experiment("experiment sweep", a),
        Command::Experiment(ExperimentCommand::Convergence(a)) => commands::convergence(a),
    }
}

fn report_error(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = commands::error_kind(&e);
            report_error(kind, &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
