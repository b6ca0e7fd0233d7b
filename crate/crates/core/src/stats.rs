//! Sufficient statistics of linear regression.
//!
//! `xx = sum x_i x_i^T`, `xy = sum x_i y_i`, `yy = sum y_i^2` and the count
//! `n`. Only the upper triangle of `xx` is ever accumulated or perturbed; the
//! lower triangle is a mirror, so `xx` is exactly symmetric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StatsWire", try_from = "StatsWire")]
pub struct SufficientStats {
    xx: DMatrix<f64>,
    xy: DVector<f64>,
    yy: f64,
    n: usize,
    noisy: bool,
}

/// Flat JSON layout: `xx_upper` is the row-major upper triangle
/// (`(0,0), (0,1), ..., (0,d-1), (1,1), ...`). `n` is public under bounded DP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsWire {
    pub d: usize,
    pub n: usize,
    pub noisy: bool,
    pub xx_upper: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: f64,
}

impl From<SufficientStats> for StatsWire {
    fn from(s: SufficientStats) -> Self {
        StatsWire {
            d: s.d(),
            n: s.n,
            noisy: s.noisy,
            xx_upper: s.upper_triangle(),
            xy: s.xy.iter().copied().collect(),
            yy: s.yy,
        }
    }
}

impl TryFrom<StatsWire> for SufficientStats {
    type Error = Error;

    fn try_from(w: StatsWire) -> Result<Self> {
        let d = w.d;
        if w.xx_upper.len() != d * (d + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: d * (d + 1) / 2,
                found: w.xx_upper.len(),
            });
        }
        if w.xy.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.xy.len(),
            });
        }
        let mut xx = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                xx[(i, j)] = w.xx_upper[k];
                xx[(j, i)] = w.xx_upper[k];
                k += 1;
            }
        }
        Ok(SufficientStats {
            xx,
            xy: DVector::from_vec(w.xy),
            yy: w.yy,
            n: w.n,
            noisy: w.noisy,
        })
    }
}

impl std::fmt::Display for StatsWire {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", serde_json::to_string(self).map_err(|_| std::fmt::Error)?)
    }
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.c
    }
}

impl SufficientStats {
    pub fn zero(d: usize) -> Self {
        Self {
            xx: DMatrix::zeros(d, d),
            xy: DVector::zeros(d),
            yy: 0.0,
            n: 0,
            noisy: false,
        }
    }

    /// Builds statistics from parts; `xx` is symmetrised from its upper triangle.
    pub fn from_parts(xx: DMatrix<f64>, xy: DVector<f64>, yy: f64, n: usize, noisy: bool) -> Result<Self> {
        let d = xy.len();
        if xx.nrows() != d || xx.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: xx.nrows(),
            });
        }
        let mut xx = xx;
        for i in 0..d {
            for j in 0..i {
                xx[(i, j)] = xx[(j, i)];
            }
        }
        Ok(Self { xx, xy, yy, n, noisy })
    }

    pub fn d(&self) -> usize {
        self.xy.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xx(&self) -> &DMatrix<f64> {
        &self.xx
    }

    pub fn xy(&self) -> &DVector<f64> {
        &self.xy
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let d = self.d();
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                out.push(self.xx[(i, j)]);
            }
        }
        out
    }

    pub fn to_wire(&self) -> StatsWire {
        self.clone().into()
    }

    /// Adds `delta` to the upper-triangle entry `(i, j)` and its mirror.
    pub(crate) fn add_xx(&mut self, i: usize, j: usize, delta: f64) {
        self.xx[(i, j)] += delta;
        if i != j {
            self.xx[(j, i)] = self.xx[(i, j)];
        }
    }

    pub(crate) fn add_xy(&mut self, i: usize, delta: f64) {
        self.xy[i] += delta;
    }

    pub(crate) fn add_yy(&mut self, delta: f64) {
        self.yy += delta;
    }

    pub(crate) fn mark_noisy(&mut self) {
        self.noisy = true;
    }
}

/// Exact sums over the dataset with compensated accumulation.
pub fn sufficient_stats(d: &Dataset) -> SufficientStats {
    let dim = d.d();
    let n_upper = dim * (dim + 1) / 2;
    let mut acc_xx = vec![Kahan::default(); n_upper];
    let mut acc_xy = vec![Kahan::default(); dim];
    let mut acc_yy = Kahan::default();
    let mut row = vec![0.0; dim];
    let x = d.inputs();
    for r in 0..d.n() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x[(r, j)];
        }
        let y = d.targets()[r];
        let mut k = 0;
        for i in 0..dim {
            let xi = row[i];
            for &xj in &row[i..] {
                acc_xx[k].add(xi * xj);
                k += 1;
            }
            acc_xy[i].add(xi * y);
        }
        acc_yy.add(y * y);
    }
    let mut xx = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let v = acc_xx[k].value();
            xx[(i, j)] = v;
            xx[(j, i)] = v;
            k += 1;
        }
    }
    SufficientStats {
        xx,
        xy: DVector::from_iterator(dim, acc_xy.into_iter().map(Kahan::value)),
        yy: acc_yy.value(),
        n: d.n(),
        noisy: false,
    }
}

/// Elementwise sum of two statistics, e.g. clean non-private plus released private.
pub fn combine_stats(a: &SufficientStats, b: &SufficientStats) -> Result<SufficientStats> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            found: b.d(),
        });
    }
    Ok(SufficientStats {
        xx: &a.xx + &b.xx,
        xy: &a.xy + &b.xy,
        yy: a.yy + b.yy,
        n: a.n + b.n,
        noisy: a.noisy || b.noisy,
    })
}

/// Accumulates row chunks independently and merges them with [`combine_stats`].
pub fn sufficient_stats_chunked(d: &Dataset, chunk: usize) -> SufficientStats {
    let chunk = chunk.max(1);
    let mut total = SufficientStats::zero(d.d());
    let mut start = 0;
    while start < d.n() {
        let end = (start + chunk).min(d.n());
        let idx: Vec<usize> = (start..end).collect();
        total = combine_stats(&total, &sufficient_stats(&d.subset(&idx))).expect("same dimension");
        start = end;
    }
    total
}
