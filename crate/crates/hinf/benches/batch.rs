//! Batch verification throughput: rayon fan-out across plants against the
//! sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use hinf::sdp::BisectOptions;
use hinf::suite::{run_suite, run_suite_sequential, SuiteSpec};
use std::hint::black_box;

fn spec() -> SuiteSpec {
    SuiteSpec {
        seed: 7,
        count: 8,
        n_min: 2,
        n_max: 3,
        bisect: BisectOptions {
            tol: 1e-4,
            ..BisectOptions::default()
        },
        ..SuiteSpec::default()
    }
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_batch");
    group.sample_size(10);
    let s = spec();
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(run_suite(black_box(&s))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(run_suite_sequential(black_box(&s))))
    });
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
