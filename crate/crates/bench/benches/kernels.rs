use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use muxrisk::pagerank::{influence_vector, solve_stationary, TransitionOperator};
use muxrisk::{dtw_distance, InfluenceSpec, PageRankParams};
use muxrisk_bench::{series, window_network};

fn supra(c: &mut Criterion) {
    let mut group = c.benchmark_group("supra");
    for n_loans in [1_000, 6_000] {
        let net = window_network(n_loans, 1);
        group.bench_with_input(BenchmarkId::new("assemble", n_loans), &net, |b, net| {
            b.iter(|| net.supra_adjacency())
        });
        let op = TransitionOperator::from_network(&net);
        let v = vec![1.0 / op.dim() as f64; op.dim()];
        let mut out = vec![0.0; op.dim()];
        group.bench_with_input(BenchmarkId::new("matvec", n_loans), &op, |b, op| {
            b.iter(|| op.matrix.matvec_into(&v, &mut out).unwrap())
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let net = window_network(6_000, 2);
    let op = TransitionOperator::from_network(&net);
    let spec = InfluenceSpec::new((0..net.n_common()).step_by(10), "bench").unwrap();
    let v = influence_vector(&net, &spec).unwrap();
    let params = PageRankParams::default();
    c.bench_function("solve 6000 loans", |b| {
        b.iter(|| solve_stationary(&op, &v, &params).unwrap())
    });
    let par = PageRankParams {
        parallel_chunks: Some(4),
        ..params
    };
    c.bench_function("solve 6000 loans, 4 chunks", |b| {
        b.iter(|| solve_stationary(&op, &v, &par).unwrap())
    });
}

fn dtw(c: &mut Criterion) {
    let a = series(100, 1);
    let b = series(100, 2);
    c.bench_function("dtw 100x100", |bench| {
        bench.iter(|| dtw_distance(&a, &b).unwrap())
    });
}

criterion_group!(benches, supra, solve, dtw);
criterion_main!(benches);
