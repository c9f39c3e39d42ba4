use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qmetric_bench::{ensemble_pair, transport_instance};
use qmetric_core::estimators::{mmd_k_estimate, ustat_kernel, wasserstein_estimate};
use qmetric_core::metrics::{mmd_k_moment, mmd_k_pairwise, wasserstein_exact};
use qmetric_core::sampler::ChannelSet;
use qmetric_core::seed::stream;
use qmetric_core::transport::solve_ot;

fn transport(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_ot");
    for n in [10usize, 50, 100, 200] {
        let (cost, p, q) = transport_instance(n, n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_ot(black_box(&cost), &p, &q).unwrap())
        });
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let mut g = c.benchmark_group("ustat_kernel");
    for k in [1u32, 3, 8, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| ustat_kernel(black_box(40), black_box(24), k).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let (e1, e2) = ensemble_pair(100, 2);
    let set = ChannelSet::new(&e1, &e2).unwrap();
    let mut g = c.benchmark_group("draw_tallies");
    for m in [1_000u64, 100_000, 10_000_000] {
        let mut rng = stream(3, &[m]);
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| b.iter(|| set.draw_tallies(m, &mut rng)));
    }
    g.finish();
}

fn distances(c: &mut Criterion) {
    let (e1, e2) = ensemble_pair(100, 4);
    c.bench_function("mmd_pairwise/k=3,N=100", |b| b.iter(|| mmd_k_pairwise(&e1, &e2, 3).unwrap()));
    c.bench_function("wasserstein_exact/N=100", |b| b.iter(|| wasserstein_exact(&e1, &e2).unwrap()));
    let (s1, s2) = ensemble_pair(8, 5);
    c.bench_function("mmd_moment/k=4,N=8", |b| b.iter(|| mmd_k_moment(&s1, &s2, 4).unwrap()));

    let set = ChannelSet::new(&e1, &e2).unwrap();
    let mut rng = stream(6, &[]);
    let tallies = set.draw_tallies(300_000, &mut rng);
    let cross = set.k12.tally(3_000_000, &mut rng);
    c.bench_function("mmd_estimate/k=2,N=100", |b| b.iter(|| mmd_k_estimate(&tallies, 2).unwrap()));
    c.bench_function("wasserstein_estimate/N=100", |b| b.iter(|| wasserstein_estimate(&cross).unwrap()));
}

criterion_group!(benches, transport, kernel, sampling, distances);
criterion_main!(benches);
