use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use regml_bench::gaussian_problem;
use regml_core::solver::{self, SolverConfig};

fn apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("regops_apply");
    for &(n, nu) in &[(1601, 0.1), (3201, 0.1), (3201, 0.05)] {
        let (op, state, _) = gaussian_problem(n, nu);
        let mut out = vec![0.0; n];
        g.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_nu{nu}")), &state.e, |b, f| {
            b.iter(|| op.apply_into(black_box(f), &mut out).unwrap())
        });
    }
    g.finish();
}

fn rk4(c: &mut Criterion) {
    let (op, state, params) = gaussian_problem(1601, 0.1);
    c.bench_function("rk4_t0.1_n1601", |b| {
        b.iter(|| solver::solve_lines(black_box(&state), &SolverConfig::rk4(), &op, &params).unwrap())
    });
}

fn picard(c: &mut Criterion) {
    let (op, state, _) = gaussian_problem(1601, 0.1);
    let horizon = solver::contraction_horizon(&op, 1.0);
    let cfg = SolverConfig::picard();
    c.bench_function("picard_subinterval_m16", |b| {
        b.iter(|| solver::picard_subinterval(black_box(&state), 16, horizon / 16.0, &cfg, &op, 1.0).unwrap())
    });
}

criterion_group!(benches, apply, rk4, picard);
criterion_main!(benches);
