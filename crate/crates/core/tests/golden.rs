//! Bundled golden files. Regenerate the tag file with `RINGPAIR_BLESS=1`;
//! the histogram comes from `scripts/brute_force_histogram.py` and is never
//! written by the crate itself.

use std::path::PathBuf;

use ringpair::engine::cross_correlate;
use ringpair::experiments::cw_stream;
use ringpair::io::{encode_tags, read_histogram_csv, read_tags, ExperimentConfig};
use ringpair::{Execution, TagStream};

const GOLDEN_TAGS: usize = 10_000;
const BIN_PS: u64 = 81;
const RANGE_PS: i64 = 81_000;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn golden_stream() -> TagStream {
    let mut cfg = ExperimentConfig::baseline();
    cfg.source.pump_power_mw = 2.0;
    cfg.source.duration_s = 0.03;
    cfg.source.rng_seed = 2024;
    let full = cw_stream(&cfg, Execution::Sequential).unwrap();
    assert!(full.len() > GOLDEN_TAGS);
    TagStream::new(
        full.tags()[..GOLDEN_TAGS].to_vec(),
        full.resolution(),
        full.channel_count(),
    )
    .unwrap()
}

#[test]
fn golden_tags_regenerate_bit_identically() {
    let mut bytes = Vec::new();
    encode_tags(&golden_stream(), &mut bytes).unwrap();
    let path = data("golden_tags.bin");
    if std::env::var_os("RINGPAIR_BLESS").is_some() {
        std::fs::write(&path, &bytes).unwrap();
    }
    let stored = std::fs::read(&path).unwrap();
    assert_eq!(stored.len(), 23 + 9 * GOLDEN_TAGS);
    assert!(stored == bytes, "golden tag file differs from a fresh simulation");
}

#[test]
fn correlator_matches_golden_histogram() {
    let stream = read_tags(&data("golden_tags.bin")).unwrap();
    let expected = read_histogram_csv(&data("golden_histogram.csv")).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let hist = cross_correlate(&stream, 0, 1, BIN_PS, (-RANGE_PS, RANGE_PS), exec).unwrap();
        assert_eq!(hist.bin_width, expected.bin_width);
        assert_eq!(hist.delay_min, expected.delay_min);
        assert_eq!(hist.counts, expected.counts);
    }
}
