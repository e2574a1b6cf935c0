//! Benchmarks for the hot paths of the core crate: ensemble weight
//! optimization, Gaussian-process fitting and posterior queries, the
//! mutual-information estimator, kernel density estimation, and
//! random-forest training.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ndarray::{Array1, Array2};

use medley_core::ensemble::{optimize_weights, EnsembleConfig, RiskMatrix};
use medley_core::feature_integration::mutual_information;
use medley_core::hyperopt::gp_fit;
use medley_core::learners::bnn::bnn_output_density;
use medley_core::learners::forest::rf_train;
use medley_core::learners::ForestConfig;
use medley_core::rng::rng_from_seed;
use medley_core::synthetic;
use rand::Rng;

fn bench_weight_optimization(c: &mut Criterion) {
    let mut r = rng_from_seed(11);
    let n = 4;
    let errors = Array1::from_shape_fn(n, |_| r.gen_range(0.05..0.3));
    let mut rho = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = r.gen_range(-0.5..0.9);
            rho[[i, j]] = v;
            rho[[j, i]] = v;
        }
    }
    let names = (0..n).map(|i| format!("m{i}")).collect();
    let risk = RiskMatrix::new(names, errors, rho).unwrap();
    let cfg = EnsembleConfig::default();
    c.bench_function("optimize_weights_4_models", |b| {
        b.iter(|| optimize_weights(black_box(&risk), black_box(&cfg)).unwrap())
    });
}

fn bench_gp(c: &mut Criterion) {
    let mut r = rng_from_seed(12);
    let inputs: Vec<Vec<f64>> = (0..25)
        .map(|_| (0..4).map(|_| r.gen_range(0.0..1.0)).collect())
        .collect();
    let values: Vec<f64> = inputs
        .iter()
        .map(|x| x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>())
        .collect();
    c.bench_function("gp_fit_25x4", |b| {
        b.iter(|| gp_fit(black_box(&inputs), black_box(&values)).unwrap())
    });
    let gp = gp_fit(&inputs, &values).unwrap();
    let query = vec![0.4, 0.2, 0.7, 0.5];
    c.bench_function("gp_posterior_25x4", |b| {
        b.iter(|| gp.posterior(black_box(&query)))
    });
}

fn bench_mutual_information(c: &mut Criterion) {
    let mut r = rng_from_seed(13);
    let a: Vec<f64> = (0..2000).map(|_| r.gen_range(0.0..1.0)).collect();
    let b_values: Vec<f64> = a
        .iter()
        .map(|&v| v + r.gen_range(-0.2..0.2))
        .collect();
    c.bench_function("mutual_information_2000x8bins", |bch| {
        bch.iter(|| mutual_information(black_box(&a), black_box(&b_values), 8).unwrap())
    });
}

fn bench_kde(c: &mut Criterion) {
    let mut r = rng_from_seed(14);
    let samples: Vec<f64> = (0..500).map(|_| r.gen_range(0.0..1.0)).collect();
    c.bench_function("kde_500_samples_64_grid", |b| {
        b.iter(|| bnn_output_density(black_box(&samples), 64).unwrap())
    });
}

fn bench_forest(c: &mut Criterion) {
    let data = synthetic::one_informative(200, 9, 15);
    let cfg = ForestConfig {
        n_trees: 30,
        ..ForestConfig::default()
    };
    c.bench_function("rf_train_200x10_30_trees", |b| {
        b.iter(|| rf_train(black_box(&data), black_box(&cfg)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_weight_optimization,
    bench_gp,
    bench_mutual_information,
    bench_kde,
    bench_forest
);
criterion_main!(benches);
