use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ringpair::experiments::cw_stream;
use ringpair::io::ExperimentConfig;
use ringpair::Execution;

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_cw");
    group.sample_size(10);
    for power in [1.0, 13.5] {
        let mut cfg = ExperimentConfig::baseline();
        cfg.source.pump_power_mw = power;
        cfg.source.duration_s = 0.05;
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, format!("{power} mW")), &cfg, |b, cfg| {
                b.iter(|| black_box(cw_stream(cfg, exec).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
