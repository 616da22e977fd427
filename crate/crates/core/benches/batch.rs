use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ftbb::batch::{run_parallel, run_sequential};
use ftbb::sim::CrashEvent;
use ftbb::trees::{gen_random_tree, GenParams};
use ftbb::Scenario;

/// A small fleet of independent runs sharing one tree, as a sweep would.
fn fleet(count: usize) -> Vec<Scenario> {
    let tree = Arc::new(gen_random_tree(7, 3000, &GenParams::default()).unwrap());
    (0..count as u64)
        .map(|seed| {
            let mut s = Scenario::new(Arc::clone(&tree), 4 + (seed as usize % 8), seed);
            s.network.loss_prob = 0.01;
            if seed % 3 == 0 {
                s.crashes = vec![CrashEvent { process: 1, at: 0.2 }];
            }
            s
        })
        .collect()
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for count in [8, 32] {
        let scenarios = fleet(count);
        group.throughput(Throughput::Elements(count as u64));
        group.bench_with_input(BenchmarkId::new("sequential", count), &scenarios, |b, s| {
            b.iter(|| black_box(run_sequential(s)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &scenarios, |b, s| {
            b.iter(|| black_box(run_parallel(s)))
        });
    }
    group.finish();
}

fn single_run(c: &mut Criterion) {
    let tree = Arc::new(gen_random_tree(7, 20_000, &GenParams::default()).unwrap());
    let s = Scenario::new(tree, 16, 1);
    c.bench_function("run/16-procs-20k-nodes", |b| b.iter(|| black_box(ftbb::run(&s).unwrap())));
}

criterion_group!(benches, batch, single_run);
criterion_main!(benches);
