use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polaron::bethe::{spectrum_match, MatchOptions};
use polaron::model::transfer;
use polaron::superlinalg::graded_eig;
use polaron::{EigOptions, C64};
use polaron_bench::generic;

fn bench_transfer(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer");
    let u = C64::new(0.37, 0.11);
    for n in [2, 4, 6] {
        let p = generic(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| transfer(black_box(u), p).unwrap()));
    }
    g.finish();
}

fn bench_graded_eig(c: &mut Criterion) {
    let mut g = c.benchmark_group("graded_eig");
    for n in [2, 4, 6] {
        let t = transfer(C64::new(0.37, 0.11), &generic(n)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| graded_eig(black_box(t), &EigOptions::default()).unwrap()));
    }
    g.finish();
}

fn bench_spectrum_match(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum_match");
    g.sample_size(10);
    let opts = MatchOptions::default();
    for n in [2, 3] {
        let p = generic(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| spectrum_match(p, &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_transfer, bench_graded_eig, bench_spectrum_match);
criterion_main!(benches);
