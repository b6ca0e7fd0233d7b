//! Monte Carlo cross-validation of the regression variants.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{split_dataset, Dataset, FeaturePreprocessor, SplitSpec};
use crate::error::{Error, Result};
use crate::evaluation::spearman::spearman_rho;
use crate::mechanism::{perturb_stats, PrivacyBudget};
use crate::projection::{check_bounds, project_dataset, thresholds_from_std, Bounds, LinearRescale, ThresholdMultipliers};
use crate::regression::{
    gibbs_posterior, posterior_fixed, predict_rows, FixedPrecisionPrior, GammaHyperPrior, GibbsConfig,
};
use crate::rng::RngStream;
use crate::stats::{combine_stats, sufficient_stats, SufficientStats};
use crate::tuning::{generate_auxiliary, tune_thresholds, MultiplierGrid, SplitScoring, TuningConfig};

use rand::RngCore;

/// The pipelines compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodVariant {
    /// Exact statistics; `pooled` adds the private rows as if they were
    /// public, otherwise only the non-private rows are used (the baseline).
    NonprivateLr { pooled: bool },
    /// Min-max rescale into the bounds, then release.
    PrivateLrNoproj,
    /// Clip into the bounds, then release.
    RobustPrivateLr,
    /// Only meaningful for the Gaussian-mean convergence experiments.
    InputPerturbationGaussianMean,
}

impl MethodVariant {
    pub const BASELINE: MethodVariant = MethodVariant::NonprivateLr { pooled: false };

    pub fn name(&self) -> &'static str {
        match self {
            MethodVariant::NonprivateLr { pooled: false } => "nonprivate_lr",
            MethodVariant::NonprivateLr { pooled: true } => "nonprivate_lr_pooled",
            MethodVariant::PrivateLrNoproj => "private_lr_noproj",
            MethodVariant::RobustPrivateLr => "robust_private_lr",
            MethodVariant::InputPerturbationGaussianMean => "input_perturbation_gaussian_mean",
        }
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "nonprivate_lr" => MethodVariant::NonprivateLr { pooled: false },
            "nonprivate_lr_pooled" => MethodVariant::NonprivateLr { pooled: true },
            "private_lr_noproj" => MethodVariant::PrivateLrNoproj,
            "robust_private_lr" => MethodVariant::RobustPrivateLr,
            "input_perturbation_gaussian_mean" => MethodVariant::InputPerturbationGaussianMean,
            other => return Err(Error::invalid(format!("unknown method variant '{other}'"))),
        })
    }
}

impl TryFrom<String> for MethodVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodVariant> for String {
    fn from(v: MethodVariant) -> String {
        v.name().to_string()
    }
}

/// Posterior used for prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitMethod {
    Fixed { lambda: f64, lambda0: f64 },
    Gibbs { hyper: GammaHyperPrior, gibbs: GibbsConfig },
}

impl Default for FitMethod {
    fn default() -> Self {
        FitMethod::Fixed {
            lambda: 1.0,
            lambda0: 1.0,
        }
    }
}

impl FitMethod {
    /// Posterior mean of beta.
    pub fn fit(&self, s: &SufficientStats, rng: &mut RngStream) -> Result<DVector<f64>> {
        match self {
            FitMethod::Fixed { lambda, lambda0 } => {
                Ok(posterior_fixed(s, &FixedPrecisionPrior::centered(s.d(), *lambda, *lambda0)?)?.mean)
            }
            FitMethod::Gibbs { hyper, gibbs } => Ok(gibbs_posterior(s, hyper, *gibbs, rng)?.mean_beta()),
        }
    }
}

/// Clipping bounds given directly or as multiples of the data's std.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Thresholds {
    Bounds { b_x: f64, b_y: f64 },
    Multipliers { omega_x: f64, omega_y: f64 },
}

impl Thresholds {
    /// Multipliers are resolved on the private data's own std, which is
    /// itself not released privately. Fixed bounds avoid that leak.
    pub fn resolve(&self, private: &Dataset) -> Result<Bounds> {
        match *self {
            Thresholds::Bounds { b_x, b_y } => Bounds::new(b_x, b_y),
            Thresholds::Multipliers { omega_x, omega_y } => {
                thresholds_from_std(private, ThresholdMultipliers::new(omega_x, omega_y)?)
            }
        }
    }
}

impl From<Bounds> for Thresholds {
    fn from(b: Bounds) -> Self {
        Thresholds::Bounds { b_x: b.b_x, b_y: b.b_y }
    }
}

impl From<ThresholdMultipliers> for Thresholds {
    fn from(m: ThresholdMultipliers) -> Self {
        Thresholds::Multipliers {
            omega_x: m.omega_x,
            omega_y: m.omega_y,
        }
    }
}

fn release(private: &Dataset, bounds: Bounds, budget: PrivacyBudget, rng: &mut RngStream) -> Result<SufficientStats> {
    check_bounds(private, bounds)?;
    perturb_stats(&sufficient_stats(private), bounds, budget, rng)
}

/// Trains one variant and returns its predictions for `test`.
#[allow(clippy::too_many_arguments)]
pub fn run_variant(
    train_nonprivate: &Dataset,
    train_private: &Dataset,
    test: &Dataset,
    variant: MethodVariant,
    budget: PrivacyBudget,
    thresholds: Thresholds,
    fit: &FitMethod,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let d = test.d();
    for ds in [train_nonprivate, train_private] {
        if ds.d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: ds.d(),
            });
        }
    }
    let clean_np = sufficient_stats(train_nonprivate);
    let private_variant = matches!(variant, MethodVariant::RobustPrivateLr | MethodVariant::PrivateLrNoproj);
    if private_variant && train_private.is_empty() {
        // nothing to release: the private variants reduce to the baseline
        return predict_rows(test.inputs(), &fit.fit(&clean_np, rng)?);
    }
    match variant {
        MethodVariant::NonprivateLr { pooled } => {
            let stats = if pooled {
                combine_stats(&clean_np, &sufficient_stats(train_private))?
            } else {
                clean_np
            };
            predict_rows(test.inputs(), &fit.fit(&stats, rng)?)
        }
        MethodVariant::RobustPrivateLr => {
            let bounds = thresholds.resolve(train_private)?;
            let noisy = release(&project_dataset(train_private, bounds), bounds, budget, rng)?;
            let beta = fit.fit(&combine_stats(&clean_np, &noisy)?, rng)?;
            predict_rows(test.inputs(), &beta)
        }
        MethodVariant::PrivateLrNoproj => {
            let bounds = thresholds.resolve(train_private)?;
            let map = LinearRescale::fit(train_private, bounds)?;
            let noisy = release(&map.apply(train_private)?, bounds, budget, rng)?;
            let np = if train_nonprivate.is_empty() {
                clean_np
            } else {
                sufficient_stats(&map.apply(train_nonprivate)?)
            };
            let beta = fit.fit(&combine_stats(&np, &noisy)?, rng)?;
            predict_rows(&map.apply_inputs(test.inputs())?, &beta)
        }
        MethodVariant::InputPerturbationGaussianMean => Err(Error::UnsupportedVariant(
            "input_perturbation_gaussian_mean applies to the Gaussian-mean convergence experiments only".into(),
        )),
    }
}

/// Where clipping bounds come from in a cross-validation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum ThresholdSource {
    Given(Thresholds),
    /// Tune multipliers once on auxiliary data sized like the private set.
    Tuned {
        n_datasets: usize,
        n_noise: usize,
        #[serde(default)]
        grid: Option<MultiplierGrid>,
    },
}

/// Real rows or draws from the linear-Gaussian generator.
#[derive(Clone, Debug)]
pub enum DataSource {
    Fixed(Dataset),
    /// Fresh data set (and fresh beta) per repeat.
    Synthetic { d: usize, lambda: f64, lambda0: f64 },
}

impl DataSource {
    pub fn d(&self) -> usize {
        match self {
            DataSource::Fixed(ds) => ds.d(),
            DataSource::Synthetic { d, .. } => *d,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DataSource::Fixed(_) => "dataset",
            DataSource::Synthetic { .. } => "synthetic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub repeats: usize,
    pub n_test: usize,
    pub n_nonprivate: usize,
    /// Private rows per repeat. Required for synthetic data; for a fixed
    /// data set `None` means every row not used for test or non-private.
    pub n_private: Option<usize>,
    pub variants: Vec<MethodVariant>,
    pub epsilon: f64,
    pub split: [f64; 3],
    pub thresholds: ThresholdSource,
    pub fit: FitMethod,
    /// Center features on training means and scale rows to unit norm;
    /// center targets on the training mean.
    pub preprocess: bool,
    pub seed: u64,
}

impl CvConfig {
    pub fn budget(&self) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon, self.split[0], self.split[1], self.split[2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: MethodVariant,
    pub rhos: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; absent with a single repeat.
    pub std: Option<f64>,
}

impl VariantResult {
    fn from_rhos(variant: MethodVariant, rhos: Vec<f64>) -> Self {
        let n = rhos.len() as f64;
        let mean = rhos.iter().sum::<f64>() / n;
        let std = (rhos.len() > 1).then(|| (rhos.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Self {
            variant,
            rhos,
            mean,
            std,
        }
    }

    pub fn std_error(&self) -> Option<f64> {
        self.std.map(|s| s / (self.rhos.len() as f64).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: CvConfig,
    pub source: String,
    pub d: usize,
    pub n_private: usize,
    pub repeats: usize,
    /// Multipliers chosen when thresholds were tuned.
    pub tuned: Option<ThresholdMultipliers>,
    pub variants: Vec<VariantResult>,
}

impl ExperimentResult {
    pub fn variant(&self, v: MethodVariant) -> Option<&VariantResult> {
        self.variants.iter().find(|r| r.variant == v)
    }

    /// Mean over repeats of `rho(method) - rho(baseline)`.
    pub fn improvement(&self, method: MethodVariant, baseline: MethodVariant) -> Option<f64> {
        let m = self.variant(method)?;
        let b = self.variant(baseline)?;
        let diffs: Vec<f64> = m.rhos.iter().zip(&b.rhos).map(|(x, y)| x - y).collect();
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    }
}

struct Fold {
    test: Dataset,
    nonprivate: Dataset,
    private: Dataset,
}

fn preprocess(fold: Fold) -> Result<Fold> {
    let train = fold.nonprivate.concat(&fold.private)?;
    let pre = FeaturePreprocessor::fit(train.inputs())?;
    let y_mean = train.targets().mean();
    let apply = |ds: &Dataset| -> Result<Dataset> {
        if ds.is_empty() {
            return Ok(ds.clone());
        }
        Dataset::new(pre.apply(ds.inputs())?, ds.targets().map(|v| v - y_mean))
    };
    Ok(Fold {
        test: apply(&fold.test)?,
        nonprivate: apply(&fold.nonprivate)?,
        private: apply(&fold.private)?,
    })
}

fn make_fold(source: &DataSource, cfg: &CvConfig, repeat: usize) -> Result<Fold> {
    let fold = match source {
        DataSource::Fixed(ds) => {
            let seed = RngStream::derive(cfg.seed, "cv-split", &[repeat as u64]).next_u64();
            let spec = SplitSpec {
                n_test: cfg.n_test,
                n_nonprivate: cfg.n_nonprivate,
                seed,
            };
            let split = split_dataset(ds, &spec)?;
            let private = match cfg.n_private {
                Some(k) if k > split.private.n() => {
                    return Err(Error::invalid(format!(
                        "requested {k} private rows but only {} remain",
                        split.private.n()
                    )))
                }
                Some(k) => split.private.subset(&(0..k).collect::<Vec<_>>()),
                None => split.private,
            };
            Fold {
                test: split.test,
                nonprivate: split.nonprivate,
                private,
            }
        }
        DataSource::Synthetic { d, lambda, lambda0 } => {
            let n_private = cfg
                .n_private
                .ok_or_else(|| Error::invalid("synthetic data needs n_private"))?;
            let n = cfg.n_test + cfg.n_nonprivate + n_private;
            let mut rng = RngStream::derive(cfg.seed, "cv-data", &[repeat as u64]);
            let all = generate_auxiliary(n, *d, *lambda, *lambda0, &mut rng)?;
            let range = |a: usize, b: usize| all.subset(&(a..b).collect::<Vec<_>>());
            Fold {
                test: range(0, cfg.n_test),
                nonprivate: range(cfg.n_test, cfg.n_test + cfg.n_nonprivate),
                private: range(cfg.n_test + cfg.n_nonprivate, n),
            }
        }
    };
    if cfg.preprocess {
        preprocess(fold)
    } else {
        Ok(fold)
    }
}

fn private_size(source: &DataSource, cfg: &CvConfig) -> Result<usize> {
    match (source, cfg.n_private) {
        (_, Some(k)) => Ok(k),
        (DataSource::Fixed(ds), None) => ds
            .n()
            .checked_sub(cfg.n_test + cfg.n_nonprivate)
            .ok_or_else(|| Error::invalid("test and non-private sets exceed the data set")),
        (DataSource::Synthetic { .. }, None) => Err(Error::invalid("synthetic data needs n_private")),
    }
}

/// Repeated random splits; every variant sees the same folds. Streams are
/// derived from `(seed, repeat)` so results do not depend on execution order.
pub fn monte_carlo_cv(source: &DataSource, cfg: &CvConfig) -> Result<ExperimentResult> {
    if cfg.repeats == 0 {
        return Err(Error::invalid("cross-validation needs at least one repeat"));
    }
    if cfg.variants.is_empty() {
        return Err(Error::invalid("no method variants requested"));
    }
    if cfg.n_test < 2 {
        return Err(Error::invalid("test sets need at least two rows for a rank correlation"));
    }
    let budget = cfg.budget()?;
    let d = source.d();
    let n_private = private_size(source, cfg)?;

    let (thresholds, tuned) = match &cfg.thresholds {
        ThresholdSource::Given(t) => (*t, None),
        ThresholdSource::Tuned { n_datasets, n_noise, grid } => {
            let tcfg = TuningConfig {
                scoring: SplitScoring::Fixed,
                ..TuningConfig::new(n_private, d, cfg.epsilon).with_replicates(*n_datasets, *n_noise)
            };
            let grid = grid.clone().unwrap_or_default();
            let search = tune_thresholds(&tcfg, &grid, budget.split(), &RngStream::derive(cfg.seed, "cv-tuning", &[]))?;
            (Thresholds::from(search.best), Some(search.best))
        }
    };

    let mut rhos = vec![Vec::with_capacity(cfg.repeats); cfg.variants.len()];
    for r in 0..cfg.repeats {
        let run = || -> Result<Vec<f64>> {
            let fold = make_fold(source, cfg, r)?;
            let mut out = Vec::with_capacity(cfg.variants.len());
            for v in &cfg.variants {
                let mut rng = RngStream::derive(cfg.seed, &format!("cv-run/{v}"), &[r as u64]);
                let pred = run_variant(
                    &fold.nonprivate,
                    &fold.private,
                    &fold.test,
                    *v,
                    budget,
                    thresholds,
                    &cfg.fit,
                    &mut rng,
                )?;
                out.push(spearman_rho(pred.as_slice(), fold.test.targets().as_slice())?);
            }
            Ok(out)
        };
        let row = run().map_err(|e| Error::RepeatFailed {
            repeat: r,
            source: Box::new(e),
        })?;
        for (acc, rho) in rhos.iter_mut().zip(row) {
            acc.push(rho);
        }
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        source: source.kind().to_string(),
        d,
        n_private,
        repeats: cfg.repeats,
        tuned,
        variants: cfg
            .variants
            .iter()
            .zip(rhos)
            .map(|(v, r)| VariantResult::from_rhos(*v, r))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(seed: u64, n: usize, d: usize) -> Dataset {
        generate_auxiliary(n, d, 1.0, 1.0, &mut RngStream::new(seed, 0)).unwrap()
    }

    fn base_cfg() -> CvConfig {
        CvConfig {
            repeats: 3,
            n_test: 30,
            n_nonprivate: 10,
            n_private: Some(100),
            variants: vec![MethodVariant::BASELINE, MethodVariant::RobustPrivateLr],
            epsilon: 2.0,
            split: [0.35, 0.6, 0.05],
            thresholds: ThresholdSource::Given(Thresholds::Multipliers {
                omega_x: 1.0,
                omega_y: 1.0,
            }),
            fit: FitMethod::default(),
            preprocess: false,
            seed: 17,
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            MethodVariant::NonprivateLr { pooled: false },
            MethodVariant::NonprivateLr { pooled: true },
            MethodVariant::PrivateLrNoproj,
            MethodVariant::RobustPrivateLr,
            MethodVariant::InputPerturbationGaussianMean,
        ] {
            assert_eq!(v.name().parse::<MethodVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<MethodVariant>(&json).unwrap(), v);
        }
        assert!("ols".parse::<MethodVariant>().is_err());
    }

    #[test]
    fn privacy_off_matches_pooled_nonprivate() {
        let all = synthetic(1, 160, 4);
        let np = all.subset(&(0..10).collect::<Vec<_>>());
        let pr = all.subset(&(10..130).collect::<Vec<_>>());
        let test = all.subset(&(130..160).collect::<Vec<_>>());
        let budget = PrivacyBudget::new(1e12, 0.35, 0.6, 0.05).unwrap();
        let wide = Thresholds::Bounds { b_x: 100.0, b_y: 100.0 };
        let fit = FitMethod::default();
        let mut rng = RngStream::new(0, 0);
        let robust = run_variant(&np, &pr, &test, MethodVariant::RobustPrivateLr, budget, wide, &fit, &mut rng).unwrap();
        let pooled = run_variant(&np, &pr, &test, MethodVariant::NonprivateLr { pooled: true }, budget, wide, &fit, &mut rng)
            .unwrap();
        assert!((&robust - &pooled).abs().max() < 1e-5);
    }

    #[test]
    fn empty_private_equals_baseline() {
        let all = synthetic(2, 50, 3);
        let np = all.subset(&(0..20).collect::<Vec<_>>());
        let test = all.subset(&(20..50).collect::<Vec<_>>());
        let empty = Dataset::empty(3);
        let budget = PrivacyBudget::new(1.0, 0.35, 0.6, 0.05).unwrap();
        let t = Thresholds::Bounds { b_x: 1.0, b_y: 1.0 };
        let fit = FitMethod::default();
        let base = run_variant(&np, &empty, &test, MethodVariant::BASELINE, budget, t, &fit, &mut RngStream::new(0, 0)).unwrap();
        for v in [MethodVariant::RobustPrivateLr, MethodVariant::PrivateLrNoproj] {
            let p = run_variant(&np, &empty, &test, v, budget, t, &fit, &mut RngStream::new(0, 0)).unwrap();
            assert_eq!(p, base);
        }
    }

    #[test]
    fn input_perturbation_is_not_a_regression_pipeline() {
        let all = synthetic(3, 40, 2);
        let budget = PrivacyBudget::new(1.0, 0.35, 0.6, 0.05).unwrap();
        let err = run_variant(
            &all,
            &all,
            &all,
            MethodVariant::InputPerturbationGaussianMean,
            budget,
            Thresholds::Bounds { b_x: 1.0, b_y: 1.0 },
            &FitMethod::default(),
            &mut RngStream::new(0, 0),
        );
        assert!(matches!(err, Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn cv_is_deterministic_and_bounded() {
        let src = DataSource::Synthetic {
            d: 4,
            lambda: 1.0,
            lambda0: 1.0,
        };
        let a = monte_carlo_cv(&src, &base_cfg()).unwrap();
        let b = monte_carlo_cv(&src, &base_cfg()).unwrap();
        assert_eq!(a, b);
        for v in &a.variants {
            assert_eq!(v.rhos.len(), 3);
            assert!(v.rhos.iter().all(|r| (-1.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn single_repeat_has_no_std() {
        let src = DataSource::Synthetic {
            d: 3,
            lambda: 1.0,
            lambda0: 1.0,
        };
        let cfg = CvConfig {
            repeats: 1,
            variants: vec![MethodVariant::RobustPrivateLr],
            ..base_cfg()
        };
        let r = monte_carlo_cv(&src, &cfg).unwrap();
        assert_eq!(r.variants[0].rhos.len(), 1);
        assert_eq!(r.variants[0].std, None);
        assert_eq!(r.variants[0].mean, r.variants[0].rhos[0]);
    }

    #[test]
    fn duplicate_variant_gives_identical_aggregates() {
        let src = DataSource::Synthetic {
            d: 3,
            lambda: 1.0,
            lambda0: 1.0,
        };
        let cfg = CvConfig {
            variants: vec![MethodVariant::RobustPrivateLr, MethodVariant::RobustPrivateLr],
            ..base_cfg()
        };
        let r = monte_carlo_cv(&src, &cfg).unwrap();
        assert_eq!(r.variants[0].rhos, r.variants[1].rhos);
        assert_eq!(r.variants[0].std, r.variants[1].std);
    }

    #[test]
    fn fixed_dataset_with_preprocessing() {
        let ds = synthetic(4, 200, 5);
        let cfg = CvConfig {
            n_private: None,
            preprocess: true,
            variants: vec![
                MethodVariant::BASELINE,
                MethodVariant::NonprivateLr { pooled: true },
                MethodVariant::PrivateLrNoproj,
                MethodVariant::RobustPrivateLr,
            ],
            ..base_cfg()
        };
        let r = monte_carlo_cv(&DataSource::Fixed(ds), &cfg).unwrap();
        assert_eq!(r.n_private, 160);
        assert!(r.improvement(MethodVariant::NonprivateLr { pooled: true }, MethodVariant::BASELINE).is_some());
    }

    #[test]
    fn failing_repeat_reports_index() {
        // a constant target makes every rank correlation undefined
        let x = nalgebra::DMatrix::from_fn(60, 2, |i, j| (i * 3 + j) as f64 / 7.0);
        let ds = Dataset::new(x, DVector::from_element(60, 1.0)).unwrap();
        let cfg = CvConfig {
            n_private: None,
            thresholds: ThresholdSource::Given(Thresholds::Bounds { b_x: 1.0, b_y: 1.0 }),
            ..base_cfg()
        };
        match monte_carlo_cv(&DataSource::Fixed(ds), &cfg) {
            Err(Error::RepeatFailed { repeat, .. }) => assert_eq!(repeat, 0),
            other => panic!("expected a failed repeat, got {other:?}"),
        }
    }

    #[test]
    fn config_serde_round_trip() {
        for thresholds in [
            ThresholdSource::Given(Thresholds::Bounds { b_x: 1.5, b_y: 0.25 }),
            ThresholdSource::Tuned {
                n_datasets: 2,
                n_noise: 3,
                grid: None,
            },
        ] {
            let cfg = CvConfig {
                thresholds,
                fit: FitMethod::Gibbs {
                    hyper: GammaHyperPrior::default(),
                    gibbs: GibbsConfig { m: 10, burn_in: 2 },
                },
                ..base_cfg()
            };
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<CvConfig>(&text).unwrap(), cfg, "{text}");
        }
    }
}
