//! Cartesian sweeps of cross-validation over dimension, data sizes and epsilon.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::cv::{monte_carlo_cv, CvConfig, DataSource, ExperimentResult, MethodVariant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub d: Vec<usize>,
    pub n_private: Vec<usize>,
    pub n_nonprivate: Vec<usize>,
    pub epsilon: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub d: usize,
    pub n_private: usize,
    pub n_nonprivate: usize,
    pub epsilon: f64,
    pub result: ExperimentResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: SweepAxes,
    pub cells: Vec<SweepCell>,
}

fn restrict_dim(source: &DataSource, d: usize) -> Result<DataSource> {
    Ok(match source {
        DataSource::Synthetic { lambda, lambda0, .. } => DataSource::Synthetic {
            d,
            lambda: *lambda,
            lambda0: *lambda0,
        },
        DataSource::Fixed(ds) => {
            if d == 0 || d > ds.d() {
                return Err(Error::invalid(format!("cannot take {d} of {} columns", ds.d())));
            }
            // columns are expected in priority order, so keep the first d
            let x = ds.inputs().columns(0, d).into_owned();
            DataSource::Fixed(ds.with_inputs(x)?)
        }
    })
}

/// Runs `monte_carlo_cv` for every axis combination with `base` otherwise
/// unchanged. Every cell uses the base seed, so cells share random streams.
pub fn sweep(source: &DataSource, axes: &SweepAxes, base: &CvConfig) -> Result<SweepResult> {
    if axes.d.is_empty() || axes.n_private.is_empty() || axes.n_nonprivate.is_empty() || axes.epsilon.is_empty() {
        return Err(Error::invalid("every sweep axis needs at least one value"));
    }
    let mut cells = Vec::new();
    for &d in &axes.d {
        let src = restrict_dim(source, d)?;
        for &n_private in &axes.n_private {
            for &n_nonprivate in &axes.n_nonprivate {
                for &epsilon in &axes.epsilon {
                    let cfg = CvConfig {
                        n_private: Some(n_private),
                        n_nonprivate,
                        epsilon,
                        ..base.clone()
                    };
                    cells.push(SweepCell {
                        d,
                        n_private,
                        n_nonprivate,
                        epsilon,
                        result: monte_carlo_cv(&src, &cfg)?,
                    });
                }
            }
        }
    }
    Ok(SweepResult {
        axes: axes.clone(),
        cells,
    })
}

impl SweepResult {
    /// Tidy long format: one row per cell, variant and repeat.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        wtr.write_record(["d", "n_private", "n_nonprivate", "epsilon", "variant", "repeat", "rho"])
            .map_err(err)?;
        for c in &self.cells {
            for v in &c.result.variants {
                for (r, rho) in v.rhos.iter().enumerate() {
                    wtr.write_record([
                        c.d.to_string(),
                        c.n_private.to_string(),
                        c.n_nonprivate.to_string(),
                        c.epsilon.to_string(),
                        v.variant.to_string(),
                        r.to_string(),
                        format!("{rho:?}"),
                    ])
                    .map_err(err)?;
                }
            }
        }
        wtr.flush().map_err(|e| Error::invalid(format!("csv write: {e}")))
    }

    /// Mean per-repeat difference in rho from the baseline, per cell and
    /// non-baseline variant. Fails if the baseline was not run.
    pub fn write_improvement_csv<W: Write>(&self, w: W, baseline: MethodVariant) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        wtr.write_record(["d", "n_private", "n_nonprivate", "epsilon", "variant", "improvement"])
            .map_err(err)?;
        for c in &self.cells {
            for v in c.result.variants.iter().filter(|v| v.variant != baseline) {
                let imp = c
                    .result
                    .improvement(v.variant, baseline)
                    .ok_or_else(|| Error::invalid(format!("baseline {baseline} missing from sweep")))?;
                wtr.write_record([
                    c.d.to_string(),
                    c.n_private.to_string(),
                    c.n_nonprivate.to_string(),
                    c.epsilon.to_string(),
                    v.variant.to_string(),
                    format!("{imp:?}"),
                ])
                .map_err(err)?;
            }
        }
        wtr.flush().map_err(|e| Error::invalid(format!("csv write: {e}")))
    }
}
