//! Bayesian linear regression from sufficient statistics.
//!
//! Fixed precisions give a closed-form Gaussian posterior
//! `Lambda* = lambda0 I + lambda xx`, `Lambda* mu* = lambda xy + lambda0 beta0`.
//! With Gamma priors on both precisions the posterior is sampled by a
//! conditionally conjugate Gibbs sampler that only touches `(xx, xy, yy, n)`.
//!
//! Perturbed `xx` can make the precision indefinite. Before any solve the
//! precision is symmetrised and eigenvalues below
//! `tau = 1e-6 * max(1, trace / d)` are raised to `tau`; the posterior
//! records whether that happened.

use std::io::{Read, Write};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::SufficientStats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPrecisionPrior {
    pub lambda: f64,
    pub lambda0: f64,
    pub beta0: DVector<f64>,
}

impl FixedPrecisionPrior {
    pub fn new(lambda: f64, lambda0: f64, beta0: DVector<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda0 > 0.0 && lambda.is_finite() && lambda0.is_finite()) {
            return Err(Error::invalid("precisions must be positive and finite"));
        }
        Ok(Self { lambda, lambda0, beta0 })
    }

    /// Zero prior mean.
    pub fn centered(d: usize, lambda: f64, lambda0: f64) -> Result<Self> {
        Self::new(lambda, lambda0, DVector::zeros(d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaHyperPrior {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for GammaHyperPrior {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 2.0,
            a0: 2.0,
            b0: 2.0,
        }
    }
}

impl GammaHyperPrior {
    pub fn validate(&self) -> Result<()> {
        if [self.a, self.b, self.a0, self.b0].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("Gamma hyperparameters must be positive"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub repaired: bool,
}

/// JSON layout of a posterior: upper triangle of the precision, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorWire {
    pub d: usize,
    pub mean: Vec<f64>,
    pub precision_upper: Vec<f64>,
    pub repaired: bool,
}

impl GaussianPosterior {
    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn to_wire(&self) -> PosteriorWire {
        let d = self.d();
        let mut up = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                up.push(self.precision[(i, j)]);
            }
        }
        PosteriorWire {
            d,
            mean: self.mean.iter().copied().collect(),
            precision_upper: up,
            repaired: self.repaired,
        }
    }

    pub fn from_wire(w: &PosteriorWire) -> Result<Self> {
        let d = w.d;
        if w.mean.len() != d || w.precision_upper.len() != d * (d + 1) / 2 {
            return Err(Error::invalid("posterior file has inconsistent dimensions"));
        }
        let mut p = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                p[(i, j)] = w.precision_upper[k];
                p[(j, i)] = w.precision_upper[k];
                k += 1;
            }
        }
        Ok(Self {
            mean: DVector::from_column_slice(&w.mean),
            precision: p,
            repaired: w.repaired,
        })
    }
}

/// Symmetrises and raises small eigenvalues to `tau`. Returns the matrix and
/// whether any eigenvalue was clamped; an untouched input is returned as is.
pub fn repair_precision(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let d = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    if d == 0 {
        return (sym, false);
    }
    let tau = 1e-6 * (sym.trace() / d as f64).max(1.0);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= tau) {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(tau));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    ((&rebuilt + rebuilt.transpose()) * 0.5, true)
}

fn factor(p: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    p.clone().cholesky().ok_or(Error::SingularPrecision)
}

fn check_dim(s: &SufficientStats, d: usize) -> Result<()> {
    if s.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s.d(),
        });
    }
    Ok(())
}

fn conditional(
    s: &SufficientStats,
    lambda: f64,
    lambda0: f64,
    beta0: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, bool)> {
    let d = s.d();
    let raw = DMatrix::identity(d, d) * lambda0 + s.xx() * lambda;
    let (precision, repaired) = repair_precision(&raw);
    let chol = factor(&precision)?;
    let rhs = s.xy() * lambda + beta0 * lambda0;
    let mean = chol.solve(&rhs);
    Ok((mean, precision, repaired))
}

pub fn posterior_fixed(s: &SufficientStats, prior: &FixedPrecisionPrior) -> Result<GaussianPosterior> {
    check_dim(s, prior.beta0.len())?;
    if *s == SufficientStats::zero(s.d()) {
        // no data: the posterior is the prior, without solve round-off
        let d = s.d();
        return Ok(GaussianPosterior {
            mean: prior.beta0.clone(),
            precision: DMatrix::identity(d, d) * prior.lambda0,
            repaired: false,
        });
    }
    let (mean, precision, repaired) = conditional(s, prior.lambda, prior.lambda0, &prior.beta0)?;
    Ok(GaussianPosterior {
        mean,
        precision,
        repaired,
    })
}

fn check_x(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    Ok(())
}

pub fn predict_point(x: &[f64], p: &GaussianPosterior) -> Result<f64> {
    check_x(x, p.d())?;
    Ok(x.iter().zip(p.mean.iter()).map(|(a, b)| a * b).sum())
}

/// Predictions `X mu*` for every row of `x`.
pub fn predict_rows(x: &DMatrix<f64>, mean: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: x.ncols(),
        });
    }
    Ok(x * mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub m: usize,
    pub burn_in: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { m: 5000, burn_in: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    /// One draw per row.
    pub betas: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    pub lambda0s: Vec<f64>,
    /// Iterations whose beta-conditional precision needed repair.
    pub repairs: usize,
}

impl PosteriorSamples {
    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn d(&self) -> usize {
        self.betas.ncols()
    }

    pub fn mean_beta(&self) -> DVector<f64> {
        DVector::from_fn(self.d(), |j, _| self.betas.column(j).mean())
    }

    /// CSV with header `lambda,lambda0,beta_0,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["lambda".to_string(), "lambda0".to_string()];
        header.extend((0..self.d()).map(|j| format!("beta_{j}")));
        let io = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        wtr.write_record(&header).map_err(io)?;
        for k in 0..self.m() {
            let mut rec = vec![format!("{:?}", self.lambdas[k]), format!("{:?}", self.lambda0s[k])];
            rec.extend((0..self.d()).map(|j| format!("{:?}", self.betas[(k, j)])));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::invalid(format!("csv write: {e}")))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let cols = rdr.headers().map_err(|e| Error::invalid(format!("csv read: {e}")))?.len();
        if cols < 3 {
            return Err(Error::invalid("samples file needs lambda, lambda0 and at least one beta"));
        }
        let d = cols - 2;
        let (mut lambdas, mut lambda0s, mut betas) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::invalid(format!("csv read: {e}")))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("csv read: {e}")))?;
            if vals.len() != cols {
                return Err(Error::invalid("ragged samples file"));
            }
            lambdas.push(vals[0]);
            lambda0s.push(vals[1]);
            betas.extend_from_slice(&vals[2..]);
        }
        let m = lambdas.len();
        Ok(Self {
            betas: DMatrix::from_row_slice(m, d, &betas),
            lambdas,
            lambda0s,
            repairs: 0,
        })
    }
}

/// Gibbs sampler for `beta`, `lambda`, `lambda0` given sufficient statistics.
///
/// Conditionals:
/// `beta | . ~ N(mu*, Lambda*^-1)`,
/// `lambda | beta ~ Gamma(a + n/2, b + qf/2)` with
/// `qf = beta' xx beta - 2 beta' xy + yy` floored at `1e-8 max(1, |yy|)`,
/// `lambda0 | beta ~ Gamma(a0 + d/2, b0 + beta'beta/2)` (shape, rate).
///
/// `lambda0 I + lambda xx` shares the eigenvectors of the symmetrised `xx`,
/// so `xx` is decomposed once and each iteration works in that basis:
/// the eigenvalue clamp is the same repair `posterior_fixed` applies, and
/// the beta draw costs O(d^2) instead of a fresh factorisation.
pub fn gibbs_posterior(
    s: &SufficientStats,
    hyper: &GammaHyperPrior,
    cfg: GibbsConfig,
    rng: &mut RngStream,
) -> Result<PosteriorSamples> {
    hyper.validate()?;
    let d = s.d();
    if d == 0 {
        return Err(Error::invalid("gibbs sampler needs d >= 1"));
    }
    if cfg.m == 0 {
        return Err(Error::invalid("gibbs sampler needs m >= 1"));
    }
    let qf_floor = 1e-8 * s.yy().abs().max(1.0);
    let shape_lambda = hyper.a + s.n() as f64 / 2.0;
    let shape_lambda0 = hyper.a0 + d as f64 / 2.0;

    let eig = ((s.xx() + s.xx().transpose()) * 0.5).symmetric_eigen();
    let mu = eig.eigenvalues;
    let v = eig.eigenvectors;
    let c = v.transpose() * s.xy();
    let mu_sum = mu.sum();

    let mut lambda = hyper.a / hyper.b;
    let mut lambda0 = hyper.a0 / hyper.b0;
    let mut betas = DMatrix::zeros(cfg.m, d);
    let mut lambdas = Vec::with_capacity(cfg.m);
    let mut lambda0s = Vec::with_capacity(cfg.m);
    let mut repairs = 0;
    let mut u = DVector::zeros(d);
    let total = cfg.burn_in + cfg.m;

    for it in 0..total {
        let tau = 1e-6 * ((d as f64 * lambda0 + lambda * mu_sum) / d as f64).max(1.0);
        let mut repaired = false;
        for i in 0..d {
            let mut p = lambda0 + lambda * mu[i];
            if p < tau {
                p = tau;
                repaired = true;
            }
            let z: f64 = StandardNormal.sample(rng);
            u[i] = lambda * c[i] / p + z / p.sqrt();
        }
        repairs += repaired as usize;

        let mut qf = s.yy();
        for i in 0..d {
            qf += mu[i] * u[i] * u[i] - 2.0 * u[i] * c[i];
        }
        let rate = hyper.b + 0.5 * qf.max(qf_floor);
        lambda = Gamma::new(shape_lambda, 1.0 / rate)
            .map_err(|_| Error::NonFinite { iteration: it })?
            .sample(rng);
        let rate0 = hyper.b0 + 0.5 * u.norm_squared();
        lambda0 = Gamma::new(shape_lambda0, 1.0 / rate0)
            .map_err(|_| Error::NonFinite { iteration: it })?
            .sample(rng);

        let finite = u.iter().all(|x| x.is_finite()) && lambda.is_finite() && lambda0.is_finite();
        if !finite || lambda <= 0.0 || lambda0 <= 0.0 {
            return Err(Error::NonFinite { iteration: it });
        }
        if it >= cfg.burn_in {
            let k = it - cfg.burn_in;
            let beta = &v * &u;
            betas.row_mut(k).copy_from(&beta.transpose());
            lambdas.push(lambda);
            lambda0s.push(lambda0);
        }
    }
    Ok(PosteriorSamples {
        betas,
        lambdas,
        lambda0s,
        repairs,
    })
}

/// Posterior-averaged prediction `(1/m) sum_k x' beta_k`.
pub fn predict_averaged(x: &[f64], samples: &PosteriorSamples) -> Result<f64> {
    if samples.m() == 0 {
        return Err(Error::invalid("no posterior samples"));
    }
    check_x(x, samples.d())?;
    let total: f64 = (0..samples.m())
        .map(|k| x.iter().enumerate().map(|(j, v)| v * samples.betas[(k, j)]).sum::<f64>())
        .sum();
    Ok(total / samples.m() as f64)
}

/// Averaged predictions for every row; linear in beta, so equal to `X mean(beta)`.
pub fn predict_rows_averaged(x: &DMatrix<f64>, samples: &PosteriorSamples) -> Result<DVector<f64>> {
    if samples.m() == 0 {
        return Err(Error::invalid("no posterior samples"));
    }
    predict_rows(x, &samples.mean_beta())
}
