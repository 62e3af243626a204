use std::hint::black_box;

use cbicl_core::evalgen::generate_planted;
use cbicl_core::lowrank::{alm_solve, choose_rank, constraint_count, AlmParams};
use cbicl_core::numerics::{sym_eig, SymMatrix};
use cbicl_core::preprocess::aggregate;
use cbicl_core::sdp::{solve_dnn, DnnRelaxation};
use cbicl_core::PairwiseConstraints;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [20, 40, 80] {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 31 + j * 17) % 13) as f64 / 13.0);
        let s = SymMatrix::new(&a + a.transpose()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| sym_eig(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn dnn(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_dnn");
    group.sample_size(10);
    for n in [8, 12] {
        let inst = generate_planted(n, n, 2, 0.25, 1).unwrap();
        let agg = aggregate(&inst.weights, &PairwiseConstraints::new(), 2).unwrap();
        let rel = DnnRelaxation::new(agg);
        group.bench_with_input(BenchmarkId::from_parameter(n), &rel, |b, rel| {
            b.iter(|| solve_dnn(black_box(rel), 1e-4).unwrap())
        });
    }
    group.finish();
}

fn alm(c: &mut Criterion) {
    let mut group = c.benchmark_group("alm_solve");
    group.sample_size(10);
    for n in [15, 40] {
        let inst = generate_planted(n, n, 3, 0.25, 2).unwrap();
        let agg = aggregate(&inst.weights, &PairwiseConstraints::new(), 3).unwrap();
        let r = choose_rank(constraint_count(&agg), 3, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &agg, |b, agg| {
            b.iter(|| alm_solve(black_box(agg), r, 7, &AlmParams::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigen, dnn, alm);
criterion_main!(benches);
