//! The correlator against an all-pairs count.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ringpair::engine::{correlate_times, cross_correlate};
use ringpair::{Execution, Tag, TagStream};

fn brute_force(stream: &TagStream, a: u8, b: u8, bin: u64, (lo, hi): (i64, i64)) -> Vec<u64> {
    let mut counts = vec![0u64; ((hi - lo) as u64 / bin) as usize];
    let starts: Vec<i64> = stream
        .tags()
        .iter()
        .filter(|t| t.channel == a)
        .map(|t| t.time as i64)
        .collect();
    let stops: Vec<i64> = stream
        .tags()
        .iter()
        .filter(|t| t.channel == b)
        .map(|t| t.time as i64)
        .collect();
    for &s in &starts {
        for &e in &stops {
            let d = e - s;
            if d >= lo && d < hi {
                counts[((d - lo) as u64 / bin) as usize] += 1;
            }
        }
    }
    counts
}

fn random_stream(rng: &mut ChaCha8Rng, n: usize, span: u64, resolution: u32) -> TagStream {
    let tags = (0..n)
        .map(|_| {
            Tag::new(
                rng.random_range(0..=span / resolution as u64) * resolution as u64,
                rng.random_range(0..3),
            )
        })
        .collect();
    TagStream::from_unsorted(tags, resolution, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn equals_all_pairs_count(
        seed in any::<u64>(),
        n in 0usize..=10_000,
        span_exp in 3u32..10,
        resolution in prop::sample::select(vec![1u32, 7, 81]),
        bin in 1u64..500,
        nbins in 1i64..400,
        offset_bins in -300i64..100,
        a in 0u8..3,
        b in 0u8..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 10u64.pow(span_exp);
        let stream = random_stream(&mut rng, n, span, resolution);
        let lo = offset_bins * bin as i64;
        let range = (lo, lo + nbins * bin as i64);
        let expected = brute_force(&stream, a, b, bin, range);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let h = cross_correlate(&stream, a, b, bin, range, exec).unwrap();
            prop_assert_eq!(&h.counts, &expected);
        }
    }
}

#[test]
fn coincident_and_duplicate_stamps() {
    let tags = vec![
        Tag::new(10, 0),
        Tag::new(10, 1),
        Tag::new(10, 1),
        Tag::new(10, 0),
        Tag::new(11, 1),
    ];
    let s = TagStream::new(tags, 1, 2).unwrap();
    let h = cross_correlate(&s, 0, 1, 1, (-2, 2), Execution::Sequential).unwrap();
    assert_eq!(h.counts, brute_force(&s, 0, 1, 1, (-2, 2)));
    assert_eq!(h.counts, vec![0, 0, 4, 2]);
}

#[test]
fn chunk_boundaries_do_not_matter() {
    // several hundred thousand starts cross the parallel work-unit size
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut a: Vec<u64> = (0..300_000).map(|_| rng.random_range(0..3_000_000_000)).collect();
    let mut b: Vec<u64> = (0..300_000).map(|_| rng.random_range(0..3_000_000_000)).collect();
    a.sort_unstable();
    b.sort_unstable();
    let range = (-200_000, 200_000);
    let seq = correlate_times(&a, &b, 1000, range, Execution::Sequential).unwrap();
    let par = correlate_times(&a, &b, 1000, range, Execution::Parallel).unwrap();
    assert_eq!(seq.counts, par.counts);
    // each start on its own, with a fresh binary search
    let mut expected = vec![0u64; seq.counts.len()];
    for &t in &a {
        let t = t as i64;
        let from = b.partition_point(|&x| (x as i64) < t + range.0);
        let to = b.partition_point(|&x| (x as i64) < t + range.1);
        for &x in &b[from..to] {
            expected[((x as i64 - t - range.0) / 1000) as usize] += 1;
        }
    }
    assert_eq!(seq.counts, expected);
}
