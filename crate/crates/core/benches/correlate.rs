use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ringpair::engine::cross_correlate;
use ringpair::experiments::cw_stream;
use ringpair::io::ExperimentConfig;
use ringpair::stream::{IDLER, SIGNAL};
use ringpair::Execution;

fn correlate(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::baseline();
    cfg.source.pump_power_mw = 13.5;
    cfg.source.duration_s = 0.2;
    let stream = cw_stream(&cfg, Execution::Parallel).unwrap();

    let mut group = c.benchmark_group("cross_correlate");
    group.sample_size(10);
    group.throughput(Throughput::Elements(stream.len() as u64));
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, stream.len()), &stream, |b, s| {
            b.iter(|| black_box(cross_correlate(s, SIGNAL, IDLER, 81, (-405_000, 405_000), exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, correlate);
criterion_main!(benches);
