use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hetlb::experiment::{coupling, ExperimentSettings};
use hetlb::par::Execution;
use hetlb::presets::{reference_params, rows, INIT_Q};
use std::hint::black_box;

fn settings(exec: Execution) -> ExperimentSettings {
    ExperimentSettings { n: 200, seeds: 8, horizon: 1.0, snapshot_dt: 0.1, master_seed: 7, l_max: 64, exec }
}

fn replications(c: &mut Criterion) {
    let params = reference_params();
    let init = rows(&INIT_Q);
    let mut group = c.benchmark_group("coupled_replications");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let s = settings(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, s| {
            b.iter(|| black_box(coupling(&params, Some(&init), &[s.n], s).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
