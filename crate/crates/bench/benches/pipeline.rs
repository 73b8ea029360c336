use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use vpdiff_bench::bundled;
use vpdiff_core::{build_harness, run_pipeline, ExploreBudget, HarnessConfig};

fn pairs(c: &mut Criterion) {
    let bound = ExploreBudget::default().loop_bound;
    let mut group = c.benchmark_group("check");
    for (old, new) in [
        ("minidev_v1", "minidev_v2"),
        ("uart_v1", "uart_v2"),
        ("e1000_v1", "e1000_v2"),
        ("e1000_v1", "e1000_v3"),
    ] {
        let plan = build_harness(
            Arc::new(bundled(old, bound)),
            Arc::new(bundled(new, bound)),
            &HarnessConfig::default(),
        )
        .unwrap();
        group.bench_function(format!("{old}->{new}"), |b| b.iter(|| run_pipeline(&plan).unwrap()));
    }
    group.finish();
}

fn loading(c: &mut Criterion) {
    c.bench_function("load e1000_v3", |b| b.iter(|| bundled("e1000_v3", 4)));
}

criterion_group!(benches, pairs, loading);
criterion_main!(benches);
