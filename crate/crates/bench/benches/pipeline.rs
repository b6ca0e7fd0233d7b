use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use privlr_bench::dataset;
use privlr_core::evaluation::spearman_rho;
use privlr_core::mechanism::perturb_stats;
use privlr_core::projection::project_dataset;
use privlr_core::regression::{gibbs_posterior, posterior_fixed};
use privlr_core::stats::sufficient_stats;
use privlr_core::tuning::{tune_thresholds, SplitScoring};
use privlr_core::{
    Bounds, FixedPrecisionPrior, GammaHyperPrior, GibbsConfig, MultiplierGrid, PrivacyBudget, RngStream, TuningConfig,
};

fn stats(c: &mut Criterion) {
    let mut g = c.benchmark_group("sufficient_stats");
    for d in [5, 10, 20] {
        let data = dataset(10_000, d, 1);
        g.bench_with_input(BenchmarkId::from_parameter(d), &data, |b, data| {
            b.iter(|| sufficient_stats(black_box(data)))
        });
    }
    g.finish();
}

fn release_and_fit(c: &mut Criterion) {
    let bounds = Bounds::new(1.0, 1.0).unwrap();
    let budget = PrivacyBudget::new(1.0, 0.35, 0.6, 0.05).unwrap();
    let s = sufficient_stats(&project_dataset(&dataset(1000, 10, 2), bounds));
    let prior = FixedPrecisionPrior::centered(10, 1.0, 1.0).unwrap();
    let mut k = 0;
    c.bench_function("perturb_and_fixed_posterior/d10", |b| {
        b.iter(|| {
            k += 1;
            let noisy = perturb_stats(&s, bounds, budget, &mut RngStream::new(3, k)).unwrap();
            posterior_fixed(&noisy, &prior).unwrap()
        })
    });
}

fn gibbs(c: &mut Criterion) {
    let s = sufficient_stats(&dataset(500, 10, 4));
    let mut g = c.benchmark_group("gibbs");
    g.sample_size(20);
    g.bench_function("d10_m1000", |b| {
        b.iter(|| {
            gibbs_posterior(
                &s,
                &GammaHyperPrior::default(),
                GibbsConfig { m: 1000, burn_in: 200 },
                &mut RngStream::new(5, 0),
            )
            .unwrap()
        })
    });
    g.finish();
}

fn spearman(c: &mut Criterion) {
    let data = dataset(1000, 1, 6);
    let a: Vec<f64> = data.inputs().column(0).iter().copied().collect();
    let b: Vec<f64> = data.targets().iter().copied().collect();
    c.bench_function("spearman/1000", |bch| bch.iter(|| spearman_rho(black_box(&a), black_box(&b)).unwrap()));
}

fn threshold_search(c: &mut Criterion) {
    let cfg = TuningConfig {
        scoring: SplitScoring::Fixed,
        ..TuningConfig::new(200, 5, 2.0).with_replicates(2, 2)
    };
    let grid = MultiplierGrid::new(vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 2.0]).unwrap();
    let mut g = c.benchmark_group("tuning");
    g.sample_size(20);
    g.bench_function("threshold_search_3x3", |b| {
        b.iter(|| tune_thresholds(&cfg, &grid, (0.35, 0.6, 0.05), &RngStream::new(7, 0)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, stats, release_and_fit, gibbs, spearman, threshold_search);
criterion_main!(benches);
