//! Scoring and experiment harnesses: rank correlation, Monte Carlo
//! cross-validation, convergence-rate runs and parameter sweeps.

pub mod convergence;
pub mod cv;
pub mod spearman;
pub mod sweep;

pub use convergence::{convergence_experiment, ConvergenceMechanism, ConvergenceRow, ConvergenceTable};
pub use cv::{
    monte_carlo_cv, run_variant, CvConfig, DataSource, ExperimentResult, FitMethod, MethodVariant, ThresholdSource,
    Thresholds, VariantResult,
};
pub use spearman::spearman_rho;
pub use sweep::{sweep, SweepAxes, SweepCell, SweepResult};
