//! Robust differentially private Bayesian linear regression.
//!
//! Private data is clipped to `[-B_x, B_x]` / `[-B_y, B_y]`, reduced to its
//! sufficient statistics, and released with Laplace noise calibrated to the
//! clipped sensitivities. Models are fitted from the (noisy) statistics,
//! optionally combined with exact statistics of non-private data.
//!
//! Modules follow the pipeline:
//! [`data`] -> [`projection`] -> [`stats`] -> [`mechanism`] -> [`regression`],
//! with [`tuning`] choosing the budget split and thresholds on synthetic
//! auxiliary data and [`evaluation`] running cross-validation, sweeps and
//! convergence experiments.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod mechanism;
pub mod projection;
pub mod regression;
pub mod rng;
pub mod stats;
pub mod tuning;

pub use data::{Dataset, RawTable, SplitSpec};
pub use error::{Error, Result};
pub use mechanism::{NoiseScales, PrivacyBudget, Release};
pub use projection::{Bounds, ThresholdMultipliers};
pub use regression::{FixedPrecisionPrior, GammaHyperPrior, GaussianPosterior, GibbsConfig, PosteriorSamples};
pub use rng::RngStream;
pub use stats::SufficientStats;
pub use tuning::{MultiplierGrid, TuningConfig};
pub use evaluation::{MethodVariant, ExperimentResult};

/// Version string embedded in every output artifact.
pub const VERSION: &str = concat!("privlr ", env!("CARGO_PKG_VERSION"));
