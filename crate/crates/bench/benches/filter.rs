use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use svcredit_bench::sv_sample;
use svcredit_core::{correlate_seed, correlated_pf, make_seed_block};

fn particle_filter(c: &mut Criterion) {
    let (y, p) = sv_sample(164, 1);
    let mut group = c.benchmark_group("correlated_pf");
    for n in [100, 500] {
        let u = make_seed_block(y.len(), n, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| correlated_pf(black_box(&y), black_box(&p), &u, n).unwrap().loglik)
        });
    }
    group.finish();
}

fn seed_refresh(c: &mut Criterion) {
    let u = make_seed_block(164, 100, 7);
    c.bench_function("correlate_seed_164x100", |b| b.iter(|| correlate_seed(black_box(&u), 0.99, 3).unwrap()));
}

criterion_group!(benches, particle_filter, seed_refresh);
criterion_main!(benches);
