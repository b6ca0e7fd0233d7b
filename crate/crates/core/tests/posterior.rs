//! Posterior computations checked against independent oracles.

use nalgebra::{DMatrix, DVector};
use privlr_core::regression::{gibbs_posterior, posterior_fixed, FixedPrecisionPrior, GammaHyperPrior, GibbsConfig};
use privlr_core::stats::sufficient_stats;
use privlr_core::tuning::generate_auxiliary;
use privlr_core::{RngStream, SufficientStats};
use rand::Rng;

fn random_stats(rng: &mut RngStream, d: usize, n: usize) -> SufficientStats {
    let data = generate_auxiliary(n, d, 1.0 + rng.random::<f64>(), 1.0, rng).unwrap();
    sufficient_stats(&data)
}

#[test]
fn fixed_posterior_matches_explicit_inverse() {
    let mut rng = RngStream::new(42, 0);
    for _ in 0..100 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(1..200);
        let s = random_stats(&mut rng, d, n);
        let lambda = 0.1 + 3.0 * rng.random::<f64>();
        let lambda0 = 0.1 + 3.0 * rng.random::<f64>();
        let beta0 = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
        let p = posterior_fixed(&s, &FixedPrecisionPrior::new(lambda, lambda0, beta0.clone()).unwrap()).unwrap();
        let precision = DMatrix::identity(d, d) * lambda0 + s.xx() * lambda;
        let oracle = precision.try_inverse().unwrap() * (s.xy() * lambda + &beta0 * lambda0);
        let rel = (&p.mean - &oracle).norm() / oracle.norm().max(1e-300);
        assert!(rel < 1e-8, "relative error {rel}");
    }
}

/// Batch-means standard error of a chain.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

#[test]
fn gibbs_agrees_with_fixed_posterior_at_posterior_precisions() {
    let data = generate_auxiliary(2000, 3, 1.0, 1.0, &mut RngStream::new(7, 0)).unwrap();
    let s = sufficient_stats(&data);
    let g = gibbs_posterior(
        &s,
        &GammaHyperPrior::default(),
        GibbsConfig { m: 20_000, burn_in: 1000 },
        &mut RngStream::new(7, 1),
    )
    .unwrap();
    let lambda = g.lambdas.iter().sum::<f64>() / g.m() as f64;
    let lambda0 = g.lambda0s.iter().sum::<f64>() / g.m() as f64;
    let fixed = posterior_fixed(&s, &FixedPrecisionPrior::centered(3, lambda, lambda0).unwrap()).unwrap();
    let mean = g.mean_beta();
    for j in 0..3 {
        let col: Vec<f64> = g.betas.column(j).iter().copied().collect();
        let se = batch_se(&col, 50);
        let gap = (mean[j] - fixed.mean[j]).abs();
        assert!(gap <= 3.0 * se, "coordinate {j}: gap {gap} vs 3 SE {}", 3.0 * se);
    }
}
