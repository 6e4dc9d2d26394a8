//! Batch throughput: rayon fan-out against one-after-another on short closed-loop runs.
//!
//! Without the `parallel` feature both entries take the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dooc::batch::{run_batch, run_batch_sequential};
use dooc::{Model, Scenario};

fn models(count: u64) -> Vec<Model> {
    (0..count)
        .map(|seed| {
            let mut scn = Scenario::paper_example();
            scn.seed = seed;
            scn.integration.t_final = 0.2;
            scn.resolve().unwrap().0
        })
        .collect()
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("closed_loop_batch");
    group.sample_size(10);
    for count in [1, 4, 8] {
        let batch = models(count);
        group.bench_with_input(BenchmarkId::new("sequential", count), &batch, |b, m| {
            b.iter(|| run_batch_sequential(m))
        });
        group.bench_with_input(BenchmarkId::new("rayon", count), &batch, |b, m| b.iter(|| run_batch(m)));
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
