//! Outlier projection onto `[-B, B]` and dispersion-based thresholds.
//!
//! Projection is what lets the release mechanism use tight sensitivity
//! bounds: every input coordinate is clipped to `[-b_x, b_x]` and every
//! target to `[-b_y, b_y]` before sufficient statistics are formed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-coordinate input bound and target bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub b_x: f64,
    pub b_y: f64,
}

impl Bounds {
    pub fn new(b_x: f64, b_y: f64) -> Result<Self> {
        for (name, v) in [("b_x", b_x), ("b_y", b_y)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { b_x, b_y })
    }
}

/// Threshold multipliers: `b_x = omega_x * sigma_x`, `b_y = omega_y * sigma_y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMultipliers {
    pub omega_x: f64,
    pub omega_y: f64,
}

impl ThresholdMultipliers {
    pub fn new(omega_x: f64, omega_y: f64) -> Result<Self> {
        for (name, v) in [("omega_x", omega_x), ("omega_y", omega_y)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { omega_x, omega_y })
    }

    /// The tuning grid `{0.1, 0.2, ..., 2.0}`, one axis.
    pub fn grid_axis() -> Vec<f64> {
        (1..=20).map(|k| k as f64 / 10.0).collect()
    }
}

#[inline]
pub fn clip_scalar(v: f64, b: f64) -> f64 {
    v.min(b).max(-b)
}

pub fn project_dataset(d: &Dataset, bounds: Bounds) -> Dataset {
    let inputs = d.inputs().map(|v| clip_scalar(v, bounds.b_x));
    let targets = d.targets().map(|v| clip_scalar(v, bounds.b_y));
    Dataset::new(inputs, targets).expect("clipping preserves shape and finiteness")
}

fn population_std<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (ss / n as f64).sqrt()
}

/// Pooled (all coordinates) input std and target std, population convention.
pub fn data_std(d: &Dataset) -> Result<(f64, f64)> {
    if d.is_empty() || d.d() == 0 {
        return Err(Error::invalid("standard deviation of an empty dataset"));
    }
    Ok((population_std(d.inputs().iter()), population_std(d.targets().iter())))
}

pub fn thresholds_from_std(d: &Dataset, m: ThresholdMultipliers) -> Result<Bounds> {
    let (sx, sy) = data_std(d)?;
    if sx == 0.0 {
        return Err(Error::Degenerate("inputs have zero standard deviation".into()));
    }
    if sy == 0.0 {
        return Err(Error::Degenerate("targets have zero standard deviation".into()));
    }
    Bounds::new(m.omega_x * sx, m.omega_y * sy)
}

/// Applies user maps to each input row and each target, then verifies the
/// result lies inside `bounds`. A violation is an error: the privacy
/// guarantee relies on the bound holding for every released record.
pub fn transform_hooks<FX, FY>(d: &Dataset, phi_x: FX, phi_y: FY, bounds: Bounds) -> Result<Dataset>
where
    FX: Fn(&[f64]) -> Vec<f64>,
    FY: Fn(f64) -> f64,
{
    let (n, dim) = (d.n(), d.d());
    let mut inputs = DMatrix::zeros(n, dim);
    let mut row = vec![0.0; dim];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = d.inputs()[(i, j)];
        }
        let out = phi_x(&row);
        if out.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: out.len(),
            });
        }
        for (j, v) in out.into_iter().enumerate() {
            if !(v.abs() <= bounds.b_x) {
                return Err(Error::BoundViolation {
                    location: format!("input ({i}, {j})"),
                    value: v,
                    bound: bounds.b_x,
                });
            }
            inputs[(i, j)] = v;
        }
    }
    let mut targets = DVector::zeros(n);
    for i in 0..n {
        let v = phi_y(d.targets()[i]);
        if !(v.abs() <= bounds.b_y) {
            return Err(Error::BoundViolation {
                location: format!("target {i}"),
                value: v,
                bound: bounds.b_y,
            });
        }
        targets[i] = v;
    }
    Dataset::new(inputs, targets)
}

/// Checks every entry already lies inside `bounds`.
pub fn check_bounds(d: &Dataset, bounds: Bounds) -> Result<()> {
    for i in 0..d.n() {
        for j in 0..d.d() {
            let v = d.inputs()[(i, j)];
            if v.abs() > bounds.b_x {
                return Err(Error::BoundViolation {
                    location: format!("input ({i}, {j})"),
                    value: v,
                    bound: bounds.b_x,
                });
            }
        }
        let v = d.targets()[i];
        if v.abs() > bounds.b_y {
            return Err(Error::BoundViolation {
                location: format!("target {i}"),
                value: v,
                bound: bounds.b_y,
            });
        }
    }
    Ok(())
}

/// Per-variable min-max linear map onto `[-B, B]`, the conventional
/// alternative to projection. Minima and maxima come from the data it is fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRescale {
    pub x_ranges: Vec<(f64, f64)>,
    pub y_range: (f64, f64),
    pub bounds: Bounds,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl LinearRescale {
    pub fn fit(d: &Dataset, bounds: Bounds) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::invalid("cannot fit a rescale on an empty dataset"));
        }
        let x_ranges = (0..d.d()).map(|j| range(d.inputs().column(j).iter().copied())).collect();
        let y_range = range(d.targets().iter().copied());
        Ok(Self {
            x_ranges,
            y_range,
            bounds,
        })
    }

    /// Maps inputs and targets. Points outside the fitted ranges map
    /// outside `[-B, B]`; fitted data maps inside.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if d.d() != self.x_ranges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x_ranges.len(),
                found: d.d(),
            });
        }
        Ok(Dataset::new(self.apply_inputs(d.inputs())?, d.targets().map(|v| self.map_y(v)))
            .expect("affine map keeps values finite"))
    }

    pub fn apply_inputs(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.x_ranges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x_ranges.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            affine(x[(i, j)], self.x_ranges[j], self.bounds.b_x)
        }))
    }

    pub fn map_y(&self, v: f64) -> f64 {
        affine(v, self.y_range, self.bounds.b_y)
    }
}

fn affine(v: f64, (lo, hi): (f64, f64), b: f64) -> f64 {
    if hi > lo {
        let t = -b + (v - lo) * (2.0 * b / (hi - lo));
        if (lo..=hi).contains(&v) {
            clip_scalar(t, b)
        } else {
            t
        }
    } else {
        0.0
    }
}
