//! Empirical convergence of private posteriors to their non-private
//! counterparts as the sample size grows.
//!
//! For each `n` one data set is drawn and kept fixed; only the privacy noise
//! varies across seeds, so the spread isolates the noise term. The error is
//! the L1 distance between private and non-private posterior means.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{perturb_stats, BoundedSample, GaussianMeanPrior, PrivacyBudget};
use crate::projection::{project_dataset, Bounds};
use crate::regression::{posterior_fixed, FixedPrecisionPrior};
use crate::rng::RngStream;
use crate::stats::sufficient_stats;
use crate::tuning::generate_auxiliary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConvergenceMechanism {
    /// Laplace noise on the sum of L1-clipped Gaussian draws.
    GaussianMeanSuffStat { d: usize, b: f64, epsilon: f64 },
    /// Laplace noise on every clipped record.
    GaussianMeanInputPerturbation { d: usize, b: f64, epsilon: f64 },
    /// Noisy sufficient statistics of clipped linear-Gaussian data, fitted
    /// with the fixed-precision posterior (`lambda = lambda0 = 1`).
    LinRegSuffStat {
        d: usize,
        b_x: f64,
        b_y: f64,
        epsilon: f64,
        split: [f64; 3],
    },
}

impl ConvergenceMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceMechanism::GaussianMeanSuffStat { .. } => "gaussian_mean_suffstat",
            ConvergenceMechanism::GaussianMeanInputPerturbation { .. } => "gaussian_mean_input_perturbation",
            ConvergenceMechanism::LinRegSuffStat { .. } => "linreg_suffstat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mechanism: ConvergenceMechanism,
    pub seeds_per_n: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(median)` against `ln(n)`.
    pub slope: f64,
}

impl ConvergenceTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        wtr.write_record(["mechanism", "n", "q05", "q25", "median", "q75", "q95", "mean", "slope"])
            .map_err(err)?;
        for r in &self.rows {
            let mut rec = vec![self.mechanism.name().to_string(), r.n.to_string()];
            rec.extend([r.q05, r.q25, r.median, r.q75, r.q95, r.mean, self.slope].iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::invalid(format!("csv write: {e}")))
    }
}

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn l1(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).abs().sum()
}

/// Draws of `N(0.5 * 1, I)`: away from the origin so clipping is active.
fn gaussian_rows(n: usize, d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        0.5 + z
    })
}

fn errors_at(mech: &ConvergenceMechanism, n: usize, seeds: usize, root: &RngStream) -> Result<Vec<f64>> {
    let mut data_rng = root.child("convergence-data", &[n as u64]);
    let noise = |s: usize| root.child("convergence-noise", &[n as u64, s as u64]);
    let mut out = Vec::with_capacity(seeds);
    match *mech {
        ConvergenceMechanism::GaussianMeanSuffStat { d, b, epsilon }
        | ConvergenceMechanism::GaussianMeanInputPerturbation { d, b, epsilon } => {
            let prior = GaussianMeanPrior::isotropic(d, 1.0, 1.0);
            let sample = BoundedSample::new(&gaussian_rows(n, d, &mut data_rng), b)?;
            let reference = sample.nonprivate_mean(&prior)?;
            let input = matches!(mech, ConvergenceMechanism::GaussianMeanInputPerturbation { .. });
            for s in 0..seeds {
                let mut rng = noise(s);
                let private = if input {
                    sample.input_perturbed_mean(&prior, epsilon, &mut rng)?
                } else {
                    sample.dp_mean(&prior, epsilon, &mut rng)?
                };
                out.push(l1(&private, &reference));
            }
        }
        ConvergenceMechanism::LinRegSuffStat {
            d,
            b_x,
            b_y,
            epsilon,
            split,
        } => {
            let bounds = Bounds::new(b_x, b_y)?;
            let budget = PrivacyBudget::new(epsilon, split[0], split[1], split[2])?;
            let prior = FixedPrecisionPrior::centered(d, 1.0, 1.0)?;
            let data = project_dataset(&generate_auxiliary(n, d, 1.0, 1.0, &mut data_rng)?, bounds);
            let clean = sufficient_stats(&data);
            let reference = posterior_fixed(&clean, &prior)?.mean;
            for s in 0..seeds {
                let noisy = perturb_stats(&clean, bounds, budget, &mut noise(s))?;
                out.push(l1(&posterior_fixed(&noisy, &prior)?.mean, &reference));
            }
        }
    }
    Ok(out)
}

/// Error quantiles per `n` and the log-log slope of the median error.
/// `n_grid` must be ascending with at least three points spanning two decades.
pub fn convergence_experiment(
    mech: ConvergenceMechanism,
    n_grid: &[usize],
    seeds_per_n: usize,
    rng: &RngStream,
) -> Result<ConvergenceTable> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::invalid("n grid must be ascending with at least three positive points"));
    }
    if (n_grid[n_grid.len() - 1] as f64) < 100.0 * n_grid[0] as f64 {
        return Err(Error::invalid("n grid must span at least two decades"));
    }
    if seeds_per_n < 2 {
        return Err(Error::invalid("need at least two seeds per n"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut errs = errors_at(&mech, n, seeds_per_n, rng)?;
        errs.sort_by(f64::total_cmp);
        rows.push(ConvergenceRow {
            n,
            q05: quantile_sorted(&errs, 0.05),
            q25: quantile_sorted(&errs, 0.25),
            median: quantile_sorted(&errs, 0.5),
            q75: quantile_sorted(&errs, 0.75),
            q95: quantile_sorted(&errs, 0.95),
            mean: errs.iter().sum::<f64>() / errs.len() as f64,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.median.ln()).collect();
    Ok(ConvergenceTable {
        mechanism: mech,
        seeds_per_n,
        rows,
        slope: ls_slope(&lx, &ly),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_slope() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert!((quantile_sorted(&v, 0.1) - 1.4).abs() < 1e-12);
        let x = [0.0, 1.0, 2.0];
        assert!((ls_slope(&x, &[1.0, -1.0, -3.0]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let m = ConvergenceMechanism::GaussianMeanSuffStat { d: 1, b: 1.0, epsilon: 1.0 };
        let rng = RngStream::new(0, 0);
        assert!(convergence_experiment(m, &[10, 100], 5, &rng).is_err());
        assert!(convergence_experiment(m, &[10, 50, 90], 5, &rng).is_err());
        assert!(convergence_experiment(m, &[100, 10, 1000], 5, &rng).is_err());
    }

    #[test]
    fn suffstat_error_shrinks_quickly() {
        let m = ConvergenceMechanism::GaussianMeanSuffStat { d: 1, b: 1.0, epsilon: 1.0 };
        let t = convergence_experiment(m, &[100, 1000, 10_000], 100, &RngStream::new(1, 0)).unwrap();
        assert!(t.slope < -0.8, "slope {}", t.slope);
        let t2 = convergence_experiment(m, &[100, 1000, 10_000], 100, &RngStream::new(1, 0)).unwrap();
        assert_eq!(t, t2);
        for r in &t.rows {
            assert!(r.q05 <= r.q25 && r.q25 <= r.median && r.median <= r.q75 && r.q75 <= r.q95);
        }
    }
}
