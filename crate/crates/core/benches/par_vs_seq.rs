//! Parallel vs sequential throughput of the data-parallel kernels: the
//! active-set enumeration oracle and the sampled monotonicity suites.
//! Run with `cargo bench -p pdflow`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pdflow::lagrangian::{sample_monotonicity_gaps, sample_monotonicity_gaps_seq};
use pdflow::metric::{
    certify_strong_monotonicity, choose_k, sample_strong_monotonicity,
    sample_strong_monotonicity_seq,
};
use pdflow::oracle::{active_set_solve, active_set_solve_seq};
use pdflow::problem::make_random_qp;

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("active_set_solve");
    for m in [8usize, 12] {
        let program = make_random_qp(1, m + 4, m, 10.0).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", m), &program, |b, p| {
            b.iter(|| active_set_solve(p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &program, |b, p| {
            b.iter(|| active_set_solve_seq(p).unwrap())
        });
    }
    group.finish();
}

fn bench_monotonicity_sampling(c: &mut Criterion) {
    let program = make_random_qp(2, 20, 10, 5.0).unwrap();
    let mut group = c.benchmark_group("monotonicity_gaps_1e4");
    group.bench_function("parallel", |b| {
        b.iter(|| sample_monotonicity_gaps(&program, 10_000, 7))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| sample_monotonicity_gaps_seq(&program, 10_000, 7))
    });
    group.finish();
}

fn bench_certificate_sampling(c: &mut Criterion) {
    let program = make_random_qp(3, 16, 8, 8.0).unwrap();
    let spec = choose_k(&program, 1.0).unwrap();
    let cert = certify_strong_monotonicity(&program, &spec);
    let mut group = c.benchmark_group("strong_monotonicity_1e4");
    group.bench_function("parallel", |b| {
        b.iter(|| sample_strong_monotonicity(&program, &spec, cert.nu, 10_000, 11))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| sample_strong_monotonicity_seq(&program, &spec, cert.nu, 10_000, 11))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_oracle,
    bench_monotonicity_sampling,
    bench_certificate_sampling
);
criterion_main!(benches);
