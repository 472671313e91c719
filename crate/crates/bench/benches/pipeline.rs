use std::hint::black_box;

use coast_bench::{fixture, problem};
use coast_core::attribution::{shapley_attributions, AttributionConfig};
use coast_core::bench::{run_seed, BenchConfig};
use coast_core::graph::discover_shared_backbone;
use coast_core::optimize::solve_path;
use coast_core::scm::{fit_scm, NoiseKind};
use coast_core::DiscoveryConfig;
use criterion::{criterion_group, criterion_main, Criterion};

fn attribution(c: &mut Criterion) {
    let mut g = c.benchmark_group("shapley");
    let small = fixture(10, 5, 2000);
    let omega: Vec<usize> = (0..10).collect();
    g.bench_function("exact_q10", |b| b.iter(|| shapley_attributions(&small.scm_s, &small.scm_t, black_box(&omega), &AttributionConfig::default(), 0).unwrap()));
    let large = fixture(50, 5, 2000);
    let omega: Vec<usize> = (0..50).collect();
    g.sample_size(10);
    g.bench_function("permutation_q50", |b| b.iter(|| shapley_attributions(&large.scm_s, &large.scm_t, black_box(&omega), &AttributionConfig::default(), 0).unwrap()));
    g.finish();
}

fn optimization(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    for q in [10, 100] {
        let f = fixture(q, 5, 2000);
        let p = problem(&f);
        let grid = p.lambda_grid().unwrap();
        g.bench_function(format!("solve_path_q{q}"), |b| b.iter(|| solve_path(black_box(&p), &grid).unwrap()));
    }
    g.finish();
}

fn models(c: &mut Criterion) {
    let mut g = c.benchmark_group("models");
    g.sample_size(10);
    let f = fixture(100, 5, 5000);
    g.bench_function("fit_scm_q100", |b| b.iter(|| fit_scm(black_box(&f.dag), &f.pair.source, NoiseKind::Gaussian).unwrap()));
    let small = fixture(10, 1, 1000);
    let data = [small.pair.source.clone(), small.pair.target.clone()];
    g.bench_function("discover_q10", |b| b.iter(|| discover_shared_backbone(small.pair.names(), black_box(&data), &[], &[], &DiscoveryConfig::default()).unwrap()));
    g.finish();
}

fn protocol(c: &mut Criterion) {
    let mut g = c.benchmark_group("bench");
    g.sample_size(10);
    let cfg = BenchConfig::new(10, 5, 3.0);
    g.bench_function("run_seed_q10_k5", |b| b.iter(|| run_seed(black_box(&cfg), 0).unwrap()));
    g.finish();
}

criterion_group!(benches, attribution, optimization, models, protocol);
criterion_main!(benches);
