//! Fixtures shared by the benchmarks in `benches/`.

use privlr_core::tuning::generate_auxiliary;
use privlr_core::{Dataset, RngStream};

/// Linear-Gaussian data with unit precisions.
pub fn dataset(n: usize, d: usize, seed: u64) -> Dataset {
    generate_auxiliary(n, d, 1.0, 1.0, &mut RngStream::new(seed, 0)).expect("valid generator arguments")
}
