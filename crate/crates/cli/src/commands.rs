use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use privlr_core::data::{
    center_targets, drug_dataset, drug_ids, load_gene_order, load_responses, load_table, parse_table,
    preprocess_features, read_dataset_csv, select_genes, write_dataset_csv,
};
use privlr_core::evaluation::spearman_rho;
use privlr_core::evaluation::{
    convergence_experiment, sweep, ConvergenceMechanism, ConvergenceTable, CvConfig, DataSource, FitMethod,
    MethodVariant, SweepAxes, SweepResult, ThresholdSource, Thresholds,
};
use privlr_core::mechanism::diffpriss;
use privlr_core::projection::thresholds_from_std;
use privlr_core::regression::{gibbs_posterior, posterior_fixed, predict_rows, PosteriorWire};
use privlr_core::stats::{combine_stats, sufficient_stats, StatsWire};
use privlr_core::tuning::{self, tune_thresholds, SplitScoring, SplitSearch, ThresholdSearch};
use privlr_core::{
    Bounds, Dataset, FixedPrecisionPrior, GammaHyperPrior, GibbsConfig, MultiplierGrid, PrivacyBudget,
    RngStream, SufficientStats, ThresholdMultipliers, TuningConfig,
};

use crate::config::{companion, delimiter_byte, resolve, write_artifact, Flags, RunLog};
use crate::{ConvergenceArgs, CvArgs, FitArgs, PredictArgs, PreprocessArgs, ReleaseArgs, TuneArgs};

const DEFAULT_SPLIT: [f64; 3] = [0.35, 0.6, 0.05];

/// Error with a fixed machine-readable kind, for failures the library
/// does not know about.
#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn cli_error(kind: &'static str, message: impl Into<String>) -> anyhow::Error {
    CliError {
        kind,
        message: message.into(),
    }
    .into()
}

pub fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CliError>() {
            return c.kind;
        }
        if let Some(c) = cause.downcast_ref::<privlr_core::Error>() {
            return c.kind();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "runtime"
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| cli_error("missing_argument", format!("--{name} is required (flag or config file)")))
}

fn check_format(format: &str) -> Result<bool> {
    match format {
        "json" => Ok(false),
        "csv" => Ok(true),
        other => Err(cli_error("invalid_argument", format!("unknown format '{other}' (json or csv)"))),
    }
}

fn hyper_prior(h: &[f64]) -> Result<GammaHyperPrior> {
    let [a, b, a0, b0] = h else {
        bail!(cli_error("invalid_argument", "hyper needs four values a,b,a0,b0"));
    };
    let p = GammaHyperPrior {
        a: *a,
        b: *b,
        a0: *a0,
        b0: *b0,
    };
    p.validate()?;
    Ok(p)
}

fn default_hyper() -> Vec<f64> {
    let h = GammaHyperPrior::default();
    vec![h.a, h.b, h.a0, h.b0]
}

fn read_dataset(path: &Path, delimiter: &str) -> Result<(Vec<String>, Vec<String>, Dataset)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset_csv(BufReader::new(file), delimiter_byte(delimiter)?).with_context(|| format!("reading {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------- preprocess

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreprocessConfig {
    expression: Option<PathBuf>,
    responses: Option<PathBuf>,
    gene_order: Option<PathBuf>,
    dims: Option<usize>,
    drugs: Option<Vec<String>>,
    delimiter: String,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            expression: None,
            responses: None,
            gene_order: None,
            dims: None,
            drugs: None,
            delimiter: ",".into(),
        }
    }
}

#[derive(Serialize)]
struct DrugSummary {
    file: String,
    n: usize,
    dropped: usize,
}

#[derive(Serialize)]
struct PreprocessResult {
    genes: Vec<String>,
    drugs: BTreeMap<String, DrugSummary>,
}

fn file_stem_for(drug: &str) -> String {
    drug.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn preprocess(a: PreprocessArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("expression", a.expression)
        .set("responses", a.responses)
        .set("gene_order", a.gene_order)
        .set("dims", a.dims)
        .set("drugs", a.drugs)
        .set("delimiter", a.delimiter);
    let cfg: PreprocessConfig = resolve("preprocess", a.common.config.as_deref(), f)?;
    let dir = a.common.out;
    let log = RunLog::start(&dir.join("manifest.json"));
    let delim = delimiter_byte(&cfg.delimiter)?;

    let mut expr = load_table(required(cfg.expression.as_ref(), "expression")?, delim)?;
    let responses = load_responses(required(cfg.responses.as_ref(), "responses")?, delim)?;
    match (&cfg.gene_order, cfg.dims) {
        (Some(order), k) => {
            let order = load_gene_order(order)?;
            let k = k.unwrap_or(order.len());
            expr = select_genes(&expr, &order, k)?;
        }
        (None, Some(k)) => bail!(cli_error("missing_argument", format!("--dims {k} needs --gene-order"))),
        (None, None) => {}
    }

    let drugs = match &cfg.drugs {
        Some(list) => list.clone(),
        None => drug_ids(&responses),
    };
    let mut summary = BTreeMap::new();
    for drug in &drugs {
        let ds = drug_dataset(&expr, &responses, drug)?;
        let file = format!("{}.csv", file_stem_for(drug));
        write_dataset_csv(csv_writer(&dir.join(&file))?, &ds.labels, &ds.genes, &ds.dataset)?;
        println!("{drug}\tn={}\tdropped={}", ds.dataset.n(), ds.dropped);
        summary.insert(
            drug.clone(),
            DrugSummary {
                file,
                n: ds.dataset.n(),
                dropped: ds.dropped,
            },
        );
    }
    let result = PreprocessResult {
        genes: expr.column_labels.clone(),
        drugs: summary,
    };
    write_artifact(&dir.join("manifest.json"), "preprocess", &cfg, &result)?;
    log.finish()
}

// ---------------------------------------------------------------------- tune

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FitKind {
    Fixed,
    Gibbs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TuneConfig {
    n_aux: Option<usize>,
    dims: Option<usize>,
    epsilon: Option<f64>,
    seed: u64,
    split: Option<[f64; 3]>,
    split_replicates: [usize; 2],
    replicates: [usize; 2],
    scoring: FitKind,
    hyper: Vec<f64>,
    gibbs_m: usize,
    burn_in: usize,
    lambda: f64,
    lambda0: f64,
    omega: Option<Vec<f64>>,
    format: String,
}

impl Default for TuneConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            n_aux: None,
            dims: None,
            epsilon: None,
            seed: 0,
            split: None,
            split_replicates: [5, 5],
            replicates: [20, 20],
            scoring: FitKind::Gibbs,
            hyper: default_hyper(),
            gibbs_m: g.m,
            burn_in: g.burn_in,
            lambda: 1.0,
            lambda0: 1.0,
            omega: None,
            format: "json".into(),
        }
    }
}

#[derive(Serialize)]
struct TuneResult {
    split: [f64; 3],
    multipliers: ThresholdMultipliers,
    splits_scored: usize,
    pairs_scored: usize,
    split_search: Option<SplitSearch>,
    threshold_search: ThresholdSearch,
}

pub fn tune(a: TuneArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("n_aux", a.n_aux)
        .set("dims", a.dims)
        .set("epsilon", a.epsilon)
        .set("seed", a.seed)
        .set("split", a.split)
        .set("split_replicates", a.split_replicates)
        .set("replicates", a.replicates)
        .set("scoring", a.scoring)
        .set("gibbs_m", a.gibbs_m)
        .set("burn_in", a.burn_in)
        .set("omega", a.omega)
        .set("format", a.format);
    let cfg: TuneConfig = resolve("tune", a.common.config.as_deref(), f)?;
    let out = a.common.out;
    let log = RunLog::start(&out);
    let csv = check_format(&cfg.format)?;

    let base = TuningConfig {
        lambda: cfg.lambda,
        lambda0: cfg.lambda0,
        ..TuningConfig::new(
            required(cfg.n_aux, "n-aux")?,
            required(cfg.dims, "dims")?,
            required(cfg.epsilon, "epsilon")?,
        )
    };
    let scoring = match cfg.scoring {
        FitKind::Fixed => SplitScoring::Fixed,
        FitKind::Gibbs => SplitScoring::Gibbs {
            hyper: hyper_prior(&cfg.hyper)?,
            gibbs: GibbsConfig {
                m: cfg.gibbs_m,
                burn_in: cfg.burn_in,
            },
        },
    };
    let split_cfg = TuningConfig {
        scoring,
        ..base.with_replicates(cfg.split_replicates[0], cfg.split_replicates[1])
    };
    let final_cfg = base.with_replicates(cfg.replicates[0], cfg.replicates[1]);
    let grid = match &cfg.omega {
        Some(w) => MultiplierGrid::new(w.clone(), w.clone())?,
        None => MultiplierGrid::default(),
    };
    let root = RngStream::derive(cfg.seed, "tune", &[]);

    let (split_search, threshold_search) = match cfg.split {
        Some(s) => (
            None,
            tune_thresholds(&final_cfg, &grid, (s[0], s[1], s[2]), &root.child("threshold-search", &[]))?,
        ),
        None => {
            let report = tuning::tune(&split_cfg, &final_cfg, &grid, &root)?;
            (Some(report.splits), report.thresholds)
        }
    };
    let split = match (&split_search, cfg.split) {
        (Some(s), _) => s.best,
        (None, Some(s)) => s,
        (None, None) => unreachable!(),
    };
    let result = TuneResult {
        split,
        multipliers: threshold_search.best,
        splits_scored: split_search.as_ref().map_or(0, |s| s.candidates.len()),
        pairs_scored: threshold_search.grid.len(),
        split_search,
        threshold_search,
    };
    write_artifact(&out, "tune", &cfg, &result)?;
    if csv {
        result.threshold_search.write_csv(csv_writer(&companion(&out, "csv"))?)?;
        if let Some(s) = &result.split_search {
            s.write_csv(csv_writer(&companion(&out, "splits.csv"))?)?;
        }
    }
    eprintln!(
        "split {:?}, multipliers ({}, {}), score {:.4}",
        result.split, result.multipliers.omega_x, result.multipliers.omega_y, result.threshold_search.best_score
    );
    log.finish()
}

// ------------------------------------------------------------------- release

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReleaseConfig {
    data: Option<PathBuf>,
    epsilon: Option<f64>,
    split: [f64; 3],
    bounds: Option<[f64; 2]>,
    multipliers: Option<[f64; 2]>,
    preprocess: bool,
    /// Always `null` in the written artifact.
    seed: Option<u64>,
    delimiter: String,
}

impl Default for ReleaseConfig {
    fn default() -> Self {
        Self {
            data: None,
            epsilon: None,
            split: DEFAULT_SPLIT,
            bounds: None,
            multipliers: None,
            preprocess: false,
            seed: None,
            delimiter: ",".into(),
        }
    }
}

pub fn release(a: ReleaseArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("data", a.data)
        .set("epsilon", a.epsilon)
        .set("split", a.split)
        .set_exclusive("bounds", a.bounds, &["multipliers"])
        .set_exclusive("multipliers", a.multipliers, &["bounds"])
        .set("preprocess", a.preprocess.then_some(true))
        .set("seed", a.seed)
        .set("delimiter", a.delimiter);
    let mut cfg: ReleaseConfig = resolve("release", a.common.config.as_deref(), f)?;
    let out = a.common.out;
    // a second release of the same data under the same receipt would spend the budget twice
    if out.exists() {
        bail!(cli_error(
            "already_released",
            format!("{} exists; refusing to release again over an existing receipt", out.display())
        ));
    }
    let log = RunLog::start(&out);

    let (_, _, mut ds) = read_dataset(required(cfg.data.as_deref(), "data")?, &cfg.delimiter)?;
    if cfg.preprocess {
        ds = Dataset::new(preprocess_features(ds.inputs())?, center_targets(ds.targets())?)?;
    }
    let bounds = match (cfg.bounds, cfg.multipliers) {
        (Some([bx, by]), None) => Bounds::new(bx, by)?,
        (None, Some([wx, wy])) => thresholds_from_std(&ds, ThresholdMultipliers::new(wx, wy)?)?,
        _ => bail!(cli_error("missing_argument", "exactly one of --bounds or --multipliers is required")),
    };
    let budget = PrivacyBudget::new(required(cfg.epsilon, "epsilon")?, cfg.split[0], cfg.split[1], cfg.split[2])?;
    let seed = cfg.seed.take().unwrap_or_else(rand::random);
    let release = diffpriss(&ds, bounds, budget, &mut RngStream::derive(seed, "release", &[]))?;
    write_artifact(&out, "release", &cfg, &release)?;
    log.finish()
}

// ----------------------------------------------------------------------- fit

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    stats: Option<PathBuf>,
    nonprivate: Option<PathBuf>,
    method: FitKind,
    lambda: f64,
    lambda0: f64,
    hyper: Vec<f64>,
    gibbs_m: usize,
    burn_in: usize,
    seed: u64,
    delimiter: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            stats: None,
            nonprivate: None,
            method: FitKind::Fixed,
            lambda: 1.0,
            lambda0: 1.0,
            hyper: default_hyper(),
            gibbs_m: g.m,
            burn_in: g.burn_in,
            seed: 0,
            delimiter: ",".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GibbsSummary {
    m: usize,
    burn_in: usize,
    repairs: usize,
    lambda_mean: f64,
    lambda0_mean: f64,
}

#[derive(Serialize, Deserialize)]
struct FitResult {
    d: usize,
    n_private: usize,
    n_nonprivate: usize,
    /// Posterior mean of beta, used by `predict`.
    mean: Vec<f64>,
    posterior: Option<PosteriorWire>,
    gibbs: Option<GibbsSummary>,
}

/// Accepts a release artifact, a bare release, or bare statistics.
fn load_stats(path: &Path) -> Result<SufficientStats> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(r) = v.get_mut("result") {
        v = r.take();
    }
    if let Some(s) = v.get_mut("stats") {
        v = s.take();
    }
    let wire: StatsWire = serde_json::from_value(v).with_context(|| format!("{} holds no statistics", path.display()))?;
    Ok(SufficientStats::try_from(wire)?)
}

pub fn fit(a: FitArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("stats", a.stats)
        .set("nonprivate", a.nonprivate)
        .set("method", a.method)
        .set("lambda", a.lambda)
        .set("lambda0", a.lambda0)
        .set("hyper", a.hyper)
        .set("gibbs_m", a.gibbs_m)
        .set("burn_in", a.burn_in)
        .set("seed", a.seed)
        .set("delimiter", a.delimiter);
    let cfg: FitConfig = resolve("fit", a.common.config.as_deref(), f)?;
    let out = a.common.out;
    let log = RunLog::start(&out);

    let private = load_stats(required(cfg.stats.as_deref(), "stats")?)?;
    let n_private = private.n();
    let (stats, n_nonprivate) = match &cfg.nonprivate {
        Some(p) => {
            let (_, _, ds) = read_dataset(p, &cfg.delimiter)?;
            (combine_stats(&private, &sufficient_stats(&ds))?, ds.n())
        }
        None => (private, 0),
    };
    let result = match cfg.method {
        FitKind::Fixed => {
            let prior = FixedPrecisionPrior::centered(stats.d(), cfg.lambda, cfg.lambda0)?;
            let post = posterior_fixed(&stats, &prior)?;
            FitResult {
                d: stats.d(),
                n_private,
                n_nonprivate,
                mean: post.mean.iter().copied().collect(),
                posterior: Some(post.to_wire()),
                gibbs: None,
            }
        }
        FitKind::Gibbs => {
            let gcfg = GibbsConfig {
                m: cfg.gibbs_m,
                burn_in: cfg.burn_in,
            };
            let samples = gibbs_posterior(
                &stats,
                &hyper_prior(&cfg.hyper)?,
                gcfg,
                &mut RngStream::derive(cfg.seed, "fit-gibbs", &[]),
            )?;
            samples.write_csv(csv_writer(&companion(&out, "samples.csv"))?)?;
            let m = samples.m() as f64;
            FitResult {
                d: stats.d(),
                n_private,
                n_nonprivate,
                mean: samples.mean_beta().iter().copied().collect(),
                posterior: None,
                gibbs: Some(GibbsSummary {
                    m: gcfg.m,
                    burn_in: gcfg.burn_in,
                    repairs: samples.repairs,
                    lambda_mean: samples.lambdas.iter().sum::<f64>() / m,
                    lambda0_mean: samples.lambda0s.iter().sum::<f64>() / m,
                }),
            }
        }
    };
    write_artifact(&out, "fit", &cfg, &result)?;
    log.finish()
}

// ------------------------------------------------------------------- predict

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictConfig {
    posterior: Option<PathBuf>,
    data: Option<PathBuf>,
    delimiter: String,
    format: String,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            posterior: None,
            data: None,
            delimiter: ",".into(),
            format: "json".into(),
        }
    }
}

#[derive(Serialize)]
struct PredictResult {
    n: usize,
    labels: Vec<String>,
    predictions: Vec<f64>,
    targets: Option<Vec<f64>>,
    spearman: Option<f64>,
}

fn load_posterior_mean(path: &Path) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let fit: FitResult = serde_json::from_value(v.get("result").cloned().unwrap_or(v))
        .with_context(|| format!("{} is not a fit artifact", path.display()))?;
    if fit.mean.len() != fit.d {
        bail!(cli_error("dimension_mismatch", "posterior mean length differs from d"));
    }
    Ok(DVector::from_vec(fit.mean))
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("posterior", a.posterior)
        .set("data", a.data)
        .set("delimiter", a.delimiter)
        .set("format", a.format);
    let cfg: PredictConfig = resolve("predict", a.common.config.as_deref(), f)?;
    let out = a.common.out;
    let log = RunLog::start(&out);
    let csv = check_format(&cfg.format)?;

    let mean = load_posterior_mean(required(cfg.posterior.as_deref(), "posterior")?)?;
    let path = required(cfg.data.as_deref(), "data")?;
    let table = parse_table(
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?),
        delimiter_byte(&cfg.delimiter)?,
    )
    .with_context(|| format!("reading {}", path.display()))?;
    if table.missing_count() > 0 {
        bail!(cli_error("parse", format!("{} contains missing values", path.display())));
    }
    let has_target = table.column_labels.last().is_some_and(|c| c == "target");
    let d = table.n_cols() - usize::from(has_target);
    let x = DMatrix::from_fn(table.n_rows(), d, |i, j| table.get(i, j).unwrap());
    let predictions: Vec<f64> = predict_rows(&x, &mean)?.iter().copied().collect();
    let targets: Option<Vec<f64>> =
        has_target.then(|| (0..table.n_rows()).map(|i| table.get(i, d).unwrap()).collect());
    let spearman = match &targets {
        Some(t) if t.len() >= 2 => Some(spearman_rho(&predictions, t)?),
        _ => None,
    };
    let result = PredictResult {
        n: predictions.len(),
        labels: table.row_labels.clone(),
        predictions,
        targets,
        spearman,
    };
    write_artifact(&out, "predict", &cfg, &result)?;
    if csv {
        let mut w = csv::Writer::from_writer(csv_writer(&companion(&out, "csv"))?);
        w.write_record(["label", "prediction"])?;
        for (l, p) in result.labels.iter().zip(&result.predictions) {
            w.write_record([l.clone(), format!("{p:?}")])?;
        }
        w.flush()?;
    }
    if let Some(rho) = result.spearman {
        eprintln!("spearman {rho:.6}");
    }
    log.finish()
}

// ------------------------------------------------------ experiment curves/sweep

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CvCliConfig {
    data: Option<PathBuf>,
    dims: Vec<usize>,
    /// Noise and prior precisions of the synthetic generator.
    gen_lambda: f64,
    gen_lambda0: f64,
    n_private: Vec<usize>,
    n_nonprivate: Vec<usize>,
    n_test: usize,
    repeats: usize,
    epsilon: Vec<f64>,
    split: [f64; 3],
    bounds: Option<[f64; 2]>,
    multipliers: Option<[f64; 2]>,
    tune_thresholds: Option<[usize; 2]>,
    variants: Vec<MethodVariant>,
    fit: FitKind,
    lambda: f64,
    lambda0: f64,
    hyper: Vec<f64>,
    gibbs_m: usize,
    burn_in: usize,
    preprocess: bool,
    seed: u64,
    delimiter: String,
    format: String,
}

impl Default for CvCliConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            data: None,
            dims: vec![10],
            gen_lambda: 1.0,
            gen_lambda0: 1.0,
            n_private: vec![100, 200, 400, 800],
            n_nonprivate: vec![10],
            n_test: 100,
            repeats: 50,
            epsilon: vec![2.0],
            split: DEFAULT_SPLIT,
            bounds: None,
            multipliers: None,
            tune_thresholds: Some([5, 5]),
            variants: vec![
                MethodVariant::BASELINE,
                MethodVariant::NonprivateLr { pooled: true },
                MethodVariant::PrivateLrNoproj,
                MethodVariant::RobustPrivateLr,
            ],
            fit: FitKind::Fixed,
            lambda: 1.0,
            lambda0: 1.0,
            hyper: default_hyper(),
            gibbs_m: g.m,
            burn_in: g.burn_in,
            preprocess: false,
            seed: 0,
            delimiter: ",".into(),
            format: "json".into(),
        }
    }
}

impl CvCliConfig {
    fn thresholds(&self) -> Result<ThresholdSource> {
        Ok(match (self.bounds, self.multipliers, self.tune_thresholds) {
            (Some([b_x, b_y]), None, None) => ThresholdSource::Given(Thresholds::Bounds { b_x, b_y }),
            (None, Some([omega_x, omega_y]), None) => {
                ThresholdSource::Given(Thresholds::Multipliers { omega_x, omega_y })
            }
            (None, None, Some([n_datasets, n_noise])) => ThresholdSource::Tuned {
                n_datasets,
                n_noise,
                grid: None,
            },
            _ => bail!(cli_error(
                "invalid_argument",
                "set exactly one of bounds, multipliers or tune_thresholds"
            )),
        })
    }

    fn fit_method(&self) -> Result<FitMethod> {
        Ok(match self.fit {
            FitKind::Fixed => FitMethod::Fixed {
                lambda: self.lambda,
                lambda0: self.lambda0,
            },
            FitKind::Gibbs => FitMethod::Gibbs {
                hyper: hyper_prior(&self.hyper)?,
                gibbs: GibbsConfig {
                    m: self.gibbs_m,
                    burn_in: self.burn_in,
                },
            },
        })
    }

    fn base(&self) -> Result<CvConfig> {
        Ok(CvConfig {
            repeats: self.repeats,
            n_test: self.n_test,
            n_nonprivate: self.n_nonprivate[0],
            n_private: None,
            variants: self.variants.clone(),
            epsilon: self.epsilon[0],
            split: self.split,
            thresholds: self.thresholds()?,
            fit: self.fit_method()?,
            preprocess: self.preprocess,
            seed: self.seed,
        })
    }
}

pub fn cv_experiment(command: &str, a: CvArgs) -> Result<()> {
    let variants = a
        .variants
        .map(|v| v.iter().map(|s| s.parse::<MethodVariant>()).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let mut f = Flags::default();
    f.set("data", a.data)
        .set("dims", a.dims)
        .set("n_private", a.n_private)
        .set("n_nonprivate", a.n_nonprivate)
        .set("n_test", a.n_test)
        .set("repeats", a.repeats)
        .set("epsilon", a.epsilon)
        .set("split", a.split)
        .set_exclusive("bounds", a.bounds, &["multipliers", "tune_thresholds"])
        .set_exclusive("multipliers", a.multipliers, &["bounds", "tune_thresholds"])
        .set_exclusive("tune_thresholds", a.tune_thresholds, &["bounds", "multipliers"])
        .set("variants", variants)
        .set("fit", a.fit)
        .set("lambda", a.lambda)
        .set("lambda0", a.lambda0)
        .set("hyper", a.hyper)
        .set("gibbs_m", a.gibbs_m)
        .set("burn_in", a.burn_in)
        .set("preprocess", a.preprocess)
        .set("seed", a.seed)
        .set("delimiter", a.delimiter)
        .set("format", a.format);
    let cfg: CvCliConfig = resolve(command, a.common.config.as_deref(), f)?;
    let out = a.common.out;
    let log = RunLog::start(&out);
    check_format(&cfg.format)?;
    if command == "experiment curves" && (cfg.dims.len() != 1 || cfg.n_nonprivate.len() != 1 || cfg.epsilon.len() != 1)
    {
        bail!(cli_error(
            "invalid_argument",
            "curves takes a single dims, n_nonprivate and epsilon; use sweep for grids"
        ));
    }
    if cfg.dims.is_empty() || cfg.n_nonprivate.is_empty() || cfg.epsilon.is_empty() || cfg.n_private.is_empty() {
        bail!(cli_error("invalid_argument", "every axis needs at least one value"));
    }

    let source = match &cfg.data {
        Some(p) => DataSource::Fixed(read_dataset(p, &cfg.delimiter)?.2),
        None => DataSource::Synthetic {
            d: cfg.dims[0],
            lambda: cfg.gen_lambda,
            lambda0: cfg.gen_lambda0,
        },
    };
    let axes = SweepAxes {
        d: cfg.dims.clone(),
        n_private: cfg.n_private.clone(),
        n_nonprivate: cfg.n_nonprivate.clone(),
        epsilon: cfg.epsilon.clone(),
    };
    let result: SweepResult = sweep(&source, &axes, &cfg.base()?)?;
    write_artifact(&out, command, &cfg, &result)?;
    result.write_long_csv(csv_writer(&companion(&out, "csv"))?)?;
    if cfg.variants.contains(&MethodVariant::BASELINE) && cfg.variants.len() > 1 {
        result.write_improvement_csv(csv_writer(&companion(&out, "improvement.csv"))?, MethodVariant::BASELINE)?;
    }
    for c in &result.cells {
        let means: Vec<String> = c
            .result
            .variants
            .iter()
            .map(|v| format!("{}={:.4}", v.variant, v.mean))
            .collect();
        eprintln!(
            "d={} n_private={} n_nonprivate={} eps={}: {}",
            c.d,
            c.n_private,
            c.n_nonprivate,
            c.epsilon,
            means.join(" ")
        );
    }
    log.finish()
}

// ------------------------------------------------------- experiment convergence

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergenceConfig {
    mechanism: String,
    n_grid: Vec<usize>,
    seeds: usize,
    dims: usize,
    b: f64,
    bounds: [f64; 2],
    epsilon: f64,
    split: [f64; 3],
    seed: u64,
    format: String,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            mechanism: "gaussian_mean_suffstat".into(),
            n_grid: vec![100, 1000, 10_000, 100_000],
            seeds: 100,
            dims: 1,
            b: 1.0,
            bounds: [1.0, 1.0],
            epsilon: 1.0,
            split: DEFAULT_SPLIT,
            seed: 0,
            format: "json".into(),
        }
    }
}

impl ConvergenceConfig {
    fn mechanism(&self) -> Result<ConvergenceMechanism> {
        let (d, b, epsilon) = (self.dims, self.b, self.epsilon);
        Ok(match self.mechanism.as_str() {
            "gaussian_mean_suffstat" => ConvergenceMechanism::GaussianMeanSuffStat { d, b, epsilon },
            "gaussian_mean_input_perturbation" => ConvergenceMechanism::GaussianMeanInputPerturbation { d, b, epsilon },
            "linreg_suffstat" => ConvergenceMechanism::LinRegSuffStat {
                d,
                b_x: self.bounds[0],
                b_y: self.bounds[1],
                epsilon,
                split: self.split,
            },
            other => bail!(cli_error("invalid_argument", format!("unknown mechanism '{other}'"))),
        })
    }
}

pub fn convergence(a: ConvergenceArgs) -> Result<()> {
    let mut f = Flags::default();
    f.set("mechanism", a.mechanism)
        .set("n_grid", a.n_grid)
        .set("seeds", a.seeds)
        .set("dims", a.dims)
        .set("b", a.b)
        .set("bounds", a.bounds)
        .set("epsilon", a.epsilon)
        .set("split", a.split)
        .set("seed", a.seed)
        .set("format", a.format);
    let cfg: ConvergenceConfig = resolve("experiment convergence", a.common.config.as_deref(), f)?;
    let out = a.common.out;
    let log = RunLog::start(&out);
    check_format(&cfg.format)?;

    let table: ConvergenceTable = convergence_experiment(
        cfg.mechanism()?,
        &cfg.n_grid,
        cfg.seeds,
        &RngStream::derive(cfg.seed, "convergence", &[]),
    )?;
    write_artifact(&out, "experiment convergence", &cfg, &table)?;
    table.write_csv(csv_writer(&companion(&out, "csv"))?)?;
    eprintln!("{}: slope {:.4}", table.mechanism.name(), table.slope);
    log.finish()
}
