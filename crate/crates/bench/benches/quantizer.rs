use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use vqmargin_bench::{ball_codebook, ball_sample, base_family};
use vqmargin_core::geometry::nearest_index;
use vqmargin_core::minimax::{closed_risk, q_sigma};
use vqmargin_core::quantizer::{erm_exhaustive, lloyd, true_risk, LloydOptions};
use vqmargin_core::{Distribution, UniformBall};

fn nearest(c: &mut Criterion) {
    let mut group = c.benchmark_group("nearest_index");
    let queries = ball_sample(1024, 4, 1);
    for k in [2usize, 8, 32] {
        let codebook = ball_codebook(k, 4, 2);
        group.throughput(Throughput::Elements(queries.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(k), &codebook, |b, cb| {
            b.iter(|| queries.iter().map(|x| nearest_index(cb, x).unwrap().index).sum::<usize>())
        });
    }
    group.finish();
}

fn lloyd_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("lloyd");
    group.sample_size(20);
    for n in [4_096usize, 65_536] {
        let sample = ball_sample(n, 2, 3);
        let start = ball_codebook(5, 2, 4);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| lloyd(&start, s, LloydOptions::default()).unwrap().risk)
        });
    }
    group.finish();
}

fn exhaustive_erm(c: &mut Criterion) {
    let sample = ball_sample(10, 2, 5);
    c.bench_function("erm_exhaustive n=10 k=3", |b| b.iter(|| erm_exhaustive(black_box(&sample), 3).unwrap().risk));
}

fn cone_sampling(c: &mut Criterion) {
    let (_, _, dist) = base_family();
    let mut group = c.benchmark_group("cone_sampling");
    group.throughput(Throughput::Elements(100_000));
    group.bench_function("100k", |b| b.iter(|| dist.sample(100_000, black_box(7)).unwrap().len()));
    group.finish();
}

fn risks(c: &mut Criterion) {
    let (fam, sigma, dist) = base_family();
    let q = q_sigma(&fam, &sigma).unwrap();
    c.bench_function("closed_risk", |b| b.iter(|| closed_risk(&fam, black_box(&sigma), &sigma).unwrap()));
    c.bench_function("true_risk exact cone", |b| b.iter(|| true_risk(&q, &dist, 100_000, black_box(0)).unwrap().value));
    let disk: Distribution = UniformBall::new(1.0, 2).unwrap().into();
    let codebook = ball_codebook(3, 2, 8);
    let mut group = c.benchmark_group("true_risk_mc");
    group.sample_size(10);
    group.bench_function("100k", |b| b.iter(|| true_risk(&codebook, &disk, 100_000, black_box(0)).unwrap().value));
    group.finish();
}

criterion_group!(benches, nearest, lloyd_iterations, exhaustive_erm, cone_sampling, risks);
criterion_main!(benches);
