//! End-to-end builder cost at shrinking accuracy budgets.

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use permutrain_core::construct::{build_random, build_theorem1, build_theorem2, BuildOptions};

fn target(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

fn bench_trained_scale(c: &mut Criterion) {
    let opts = BuildOptions::default();
    let mut group = c.benchmark_group("build_trained_scale");
    group.sample_size(20);
    for &eps in &[0.5f64, 0.25, 0.1] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &eps| {
            b.iter(|| build_theorem1(target, black_box(eps), &opts).unwrap().0.width())
        });
    }
    group.finish();
}

fn bench_fixed_scale(c: &mut Criterion) {
    let opts = BuildOptions::default();
    let mut group = c.benchmark_group("build_fixed_scale");
    group.sample_size(20);
    for &eps in &[0.5f64, 0.25] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &eps| {
            b.iter(|| build_theorem2(target, black_box(eps), &opts).unwrap().0.width())
        });
    }
    group.finish();
}

fn bench_random_init(c: &mut Criterion) {
    let opts = BuildOptions::default();
    let mut group = c.benchmark_group("build_random_init");
    group.sample_size(10);
    group.bench_function("eps_0.3_delta_0.2", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            build_random(target, 0.3, 0.2, black_box(seed), &opts).map(|(net, _)| net.width())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_trained_scale, bench_fixed_scale, bench_random_init);
criterion_main!(benches);
