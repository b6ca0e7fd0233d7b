//! Laplace release of sufficient statistics under bounded differential privacy.
//!
//! With inputs clipped to `|x_ij| <= B_x` and targets to `|y_i| <= B_y`,
//! replacing one record moves each entry of `xx` by at most `2 B_x^2`, the
//! vector `xy` by at most `2 d B_x B_y` in L1, and `yy` by at most `B_y^2`.
//! The `d(d+1)/2` free entries of `xx` share `p1 * eps` by basic composition,
//! which gives the scales
//!
//! ```text
//! b_xx = d(d+1) B_x^2 / (p1 eps)
//! b_xy = 2 d B_x B_y / (p2 eps)
//! b_yy = B_y^2 / (p3 eps)
//! ```
//!
//! The Gaussian-mean mechanisms at the bottom of the module exist to check
//! the convergence theory: perturbing the sum converges to the non-private
//! posterior at rate `1/n`, perturbing every record does not.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::projection::{check_bounds, project_dataset, Bounds};
use crate::rng::{seed_commitment, RngStream};
use crate::stats::{sufficient_stats, StatsWire, SufficientStats};

/// Total epsilon and its split across `xx`, `xy` and `yy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, p1: f64, p2: f64, p3: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        for (name, p) in [("p1", p1), ("p2", p2), ("p3", p3)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if (p1 + p2 + p3 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "budget shares must sum to 1, got {}",
                p1 + p2 + p3
            )));
        }
        Ok(Self { epsilon, p1, p2, p3 })
    }

    pub fn with_split(epsilon: f64, split: (f64, f64, f64)) -> Result<Self> {
        Self::new(epsilon, split.0, split.1, split.2)
    }

    pub fn split(&self) -> (f64, f64, f64) {
        (self.p1, self.p2, self.p3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    pub b_xx: f64,
    pub b_xy: f64,
    pub b_yy: f64,
}

pub fn noise_scales(d: usize, bounds: Bounds, budget: PrivacyBudget) -> Result<NoiseScales> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let df = d as f64;
    let eps = budget.epsilon;
    Ok(NoiseScales {
        b_xx: df * (df + 1.0) * bounds.b_x * bounds.b_x / (budget.p1 * eps),
        b_xy: 2.0 * df * bounds.b_x * bounds.b_y / (budget.p2 * eps),
        b_yy: bounds.b_y * bounds.b_y / (budget.p3 * eps),
    })
}

/// Laplace(0, scale) by inversion of one open-interval uniform draw.
pub fn laplace_sample(scale: f64, rng: &mut RngStream) -> f64 {
    let u = rng.uniform_open() - 0.5;
    u.signum() * scale * (1.0 - 2.0 * u.abs()).ln()
}

/// Adds Laplace noise to the upper triangle of `xx` (mirrored), to each
/// entry of `xy`, and to `yy`. Draw order is fixed: `xx` row-major upper
/// triangle, then `xy`, then `yy`.
pub fn perturb_stats(
    s: &SufficientStats,
    bounds: Bounds,
    budget: PrivacyBudget,
    rng: &mut RngStream,
) -> Result<SufficientStats> {
    if s.is_noisy() {
        return Err(Error::AlreadyNoisy);
    }
    let d = s.d();
    let scales = noise_scales(d, bounds, budget)?;
    let mut out = s.clone();
    for i in 0..d {
        for j in i..d {
            out.add_xx(i, j, laplace_sample(scales.b_xx, rng));
        }
    }
    for i in 0..d {
        out.add_xy(i, laplace_sample(scales.b_xy, rng));
    }
    out.add_yy(laplace_sample(scales.b_yy, rng));
    out.mark_noisy();
    Ok(out)
}

/// Record of what a release spent. The seed itself is not disclosed; only a
/// SHA-256 commitment to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetReceipt {
    pub epsilon: f64,
    pub split: [f64; 3],
    pub bounds: Bounds,
    pub d: usize,
    pub n: usize,
    pub seed_commitment: String,
    pub neighbouring: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Release {
    pub stats: StatsWire,
    pub receipt: BudgetReceipt,
}

impl Release {
    pub fn stats(&self) -> Result<SufficientStats> {
        SufficientStats::try_from(self.stats.clone())
    }
}

/// Releases a dataset that is already inside `bounds`; any entry outside
/// them is a hard error.
pub fn release_bounded(
    d: &Dataset,
    bounds: Bounds,
    budget: PrivacyBudget,
    rng: &mut RngStream,
) -> Result<Release> {
    check_bounds(d, bounds)?;
    let (seed, stream) = (rng.seed(), rng.stream());
    let noisy = perturb_stats(&sufficient_stats(d), bounds, budget, rng)?;
    Ok(Release {
        receipt: BudgetReceipt {
            epsilon: budget.epsilon,
            split: [budget.p1, budget.p2, budget.p3],
            bounds,
            d: d.d(),
            n: d.n(),
            seed_commitment: seed_commitment(seed, stream),
            neighbouring: "bounded".into(),
        },
        stats: noisy.into(),
    })
}

/// Project, compute statistics, perturb.
pub fn diffpriss(d: &Dataset, bounds: Bounds, budget: PrivacyBudget, rng: &mut RngStream) -> Result<Release> {
    release_bounded(&project_dataset(d, bounds), bounds, budget, rng)
}

/// Fixed-precision Gaussian prior for the mean of `x_i ~ N(mu, Lambda^-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeanPrior {
    pub mu0: DVector<f64>,
    pub lambda0: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
}

impl GaussianMeanPrior {
    pub fn isotropic(d: usize, lambda0: f64, lambda: f64) -> Self {
        Self {
            mu0: DVector::zeros(d),
            lambda0: DMatrix::identity(d, d) * lambda0,
            lambda: DMatrix::identity(d, d) * lambda,
        }
    }

    pub fn d(&self) -> usize {
        self.mu0.len()
    }

    /// `(Lambda0 + n Lambda)^-1 (Lambda sum + Lambda0 mu0)`.
    pub fn posterior_mean(&self, n: usize, sum: &DVector<f64>) -> Result<DVector<f64>> {
        let precision = &self.lambda0 + &self.lambda * n as f64;
        let rhs = &self.lambda * sum + &self.lambda0 * &self.mu0;
        precision
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(Error::SingularPrecision)
    }
}

/// Radially scales a row onto the L1 ball of radius `b` when it lies outside.
pub fn project_l1(row: &mut [f64], b: f64) {
    let norm: f64 = row.iter().map(|v| v.abs()).sum();
    if norm > b {
        let s = b / norm;
        row.iter_mut().for_each(|v| *v *= s);
    }
}

/// Data rows projected onto the L1 ball, kept with their exact sum.
#[derive(Clone, Debug)]
pub struct BoundedSample {
    rows: DMatrix<f64>,
    sum: DVector<f64>,
    b: f64,
}

impl BoundedSample {
    pub fn new(data: &DMatrix<f64>, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("L1 bound must be positive, got {b}")));
        }
        let mut rows = data.clone();
        let mut buf = vec![0.0; data.ncols()];
        for i in 0..rows.nrows() {
            for (j, v) in buf.iter_mut().enumerate() {
                *v = rows[(i, j)];
            }
            project_l1(&mut buf, b);
            for (j, v) in buf.iter().enumerate() {
                rows[(i, j)] = *v;
            }
        }
        let sum = DVector::from_fn(rows.ncols(), |j, _| rows.column(j).sum());
        Ok(Self { rows, sum, b })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    /// Laplace scale shared by both Gaussian-mean mechanisms.
    pub fn noise_scale(&self, epsilon: f64) -> f64 {
        2.0 * self.b * self.d() as f64 / epsilon
    }

    pub fn nonprivate_mean(&self, prior: &GaussianMeanPrior) -> Result<DVector<f64>> {
        prior.posterior_mean(self.n(), &self.sum)
    }

    /// Perturbs the sum once with `Laplace(0, 2bd/eps)` per coordinate.
    pub fn dp_mean(&self, prior: &GaussianMeanPrior, epsilon: f64, rng: &mut RngStream) -> Result<DVector<f64>> {
        if self.n() == 0 {
            return Ok(prior.mu0.clone());
        }
        let scale = self.noise_scale(epsilon);
        let noisy = DVector::from_fn(self.d(), |j, _| self.sum[j] + laplace_sample(scale, rng));
        prior.posterior_mean(self.n(), &noisy)
    }

    /// Perturbs every entry of every record with `Laplace(0, 2bd/eps)`.
    pub fn input_perturbed_mean(
        &self,
        prior: &GaussianMeanPrior,
        epsilon: f64,
        rng: &mut RngStream,
    ) -> Result<DVector<f64>> {
        if self.n() == 0 {
            return Ok(prior.mu0.clone());
        }
        let scale = self.noise_scale(epsilon);
        let mut noisy = self.sum.clone();
        for _ in 0..self.n() {
            for j in 0..self.d() {
                noisy[j] += laplace_sample(scale, rng);
            }
        }
        prior.posterior_mean(self.n(), &noisy)
    }
}

fn check_prior(data: &DMatrix<f64>, prior: &GaussianMeanPrior) -> Result<()> {
    if data.ncols() != prior.d() {
        return Err(Error::DimensionMismatch {
            expected: prior.d(),
            found: data.ncols(),
        });
    }
    Ok(())
}

/// Private posterior mean of a Gaussian from the perturbed sum.
/// With no data nothing is released and the prior mean is returned.
pub fn gaussian_mean_dp(
    data: &DMatrix<f64>,
    b: f64,
    prior: &GaussianMeanPrior,
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    check_prior(data, prior)?;
    BoundedSample::new(data, b)?.dp_mean(prior, epsilon, rng)
}

/// Naive input perturbation baseline; not consistent as `n` grows.
pub fn gaussian_mean_input_perturbation(
    data: &DMatrix<f64>,
    b: f64,
    prior: &GaussianMeanPrior,
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    check_prior(data, prior)?;
    BoundedSample::new(data, b)?.input_perturbed_mean(prior, epsilon, rng)
}

pub fn gaussian_mean_nonprivate(data: &DMatrix<f64>, b: f64, prior: &GaussianMeanPrior) -> Result<DVector<f64>> {
    check_prior(data, prior)?;
    BoundedSample::new(data, b)?.nonprivate_mean(prior)
}

/// Equal-width histogram bins over `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl BinSpec {
    fn index(&self, v: f64) -> Option<usize> {
        if v < self.lo || v >= self.hi {
            return None;
        }
        let k = ((v - self.lo) / (self.hi - self.lo) * self.count as f64) as usize;
        Some(k.min(self.count - 1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioCheck {
    pub worst_log_ratio: f64,
    pub epsilon: f64,
    pub bins_used: usize,
}

impl RatioCheck {
    pub fn exceeds(&self, slack: f64) -> bool {
        self.worst_log_ratio > self.epsilon + slack
    }
}

/// Histograms a scalar mechanism on two neighbouring inputs and returns the
/// largest `|log p(c) / p'(c)|` over bins where both histograms hold at
/// least `min_count` samples. A statistical diagnostic, not a proof.
pub fn dp_ratio_check<A, B>(
    mut release_a: A,
    mut release_b: B,
    epsilon: f64,
    bins: BinSpec,
    n_samples: usize,
    min_count: usize,
    rng: &mut RngStream,
) -> Result<RatioCheck>
where
    A: FnMut(&mut RngStream) -> f64,
    B: FnMut(&mut RngStream) -> f64,
{
    if bins.count == 0 || !(bins.hi > bins.lo) {
        return Err(Error::invalid("bin range is empty"));
    }
    let mut rng_a = rng.child("ratio-a", &[]);
    let mut rng_b = rng.child("ratio-b", &[]);
    let mut ha = vec![0u64; bins.count];
    let mut hb = vec![0u64; bins.count];
    for _ in 0..n_samples {
        if let Some(k) = bins.index(release_a(&mut rng_a)) {
            ha[k] += 1;
        }
        if let Some(k) = bins.index(release_b(&mut rng_b)) {
            hb[k] += 1;
        }
    }
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for (&ca, &cb) in ha.iter().zip(&hb) {
        if ca as usize >= min_count && cb as usize >= min_count {
            used += 1;
            worst = worst.max((ca as f64 / cb as f64).ln().abs());
        }
    }
    if used == 0 {
        return Err(Error::InsufficientSamples(format!(
            "no bin holds {min_count} samples from both releases"
        )));
    }
    Ok(RatioCheck {
        worst_log_ratio: worst,
        epsilon,
        bins_used: used,
    })
}
