use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::stream::TagStream;

use super::histogram::Histogram;

/// Starts handled by one parallel work unit.
const CHUNK: usize = 1 << 16;

/// Histogram of delays `t_b - t_a` for every pair of an `a` tag and a `b`
/// tag inside the delay range.
///
/// One sorted pass over each channel: for every start the window of
/// candidate stops is found by advancing a lower and an upper cursor.
pub fn cross_correlate(
    stream: &TagStream,
    ch_a: u8,
    ch_b: u8,
    bin_width: u64,
    delay_range: (i64, i64),
    exec: Execution,
) -> Result<Histogram> {
    check_sorted(stream)?;
    for ch in [ch_a, ch_b] {
        if ch >= stream.channel_count() {
            return Err(Error::UnknownChannel(ch));
        }
    }
    let a = stream.channel_times(ch_a);
    let b = stream.channel_times(ch_b);
    let mut h = correlate_times(&a, &b, bin_width, delay_range, exec)?;
    h.acquisition_s = stream.acquisition_s();
    h.tick_ps = stream.resolution() as u64;
    Ok(h)
}

/// Core of [`cross_correlate`] on raw sorted time lists.
pub fn correlate_times(
    a: &[u64],
    b: &[u64],
    bin_width: u64,
    (dmin, dmax): (i64, i64),
    exec: Execution,
) -> Result<Histogram> {
    let mut hist = Histogram::new(bin_width, dmin, dmax)?;
    let n_chunks = a.len().div_ceil(CHUNK);
    let nbins = hist.len();
    let partials = map_indexed(exec, n_chunks, |c| {
        let starts = &a[c * CHUNK..((c + 1) * CHUNK).min(a.len())];
        let mut counts = vec![0u64; nbins];
        // first stop with t_b >= t_a + dmin
        let first_lo = starts[0] as i64 + dmin;
        let mut lo = b.partition_point(|&t| (t as i64) < first_lo);
        let mut hi = lo;
        for &ta in starts {
            let ta = ta as i64;
            while lo < b.len() && (b[lo] as i64) < ta + dmin {
                lo += 1;
            }
            if hi < lo {
                hi = lo;
            }
            while hi < b.len() && (b[hi] as i64) < ta + dmax {
                hi += 1;
            }
            for &tb in &b[lo..hi] {
                let j = ((tb as i64 - ta - dmin) as u64 / bin_width) as usize;
                counts[j] += 1;
            }
        }
        counts
    });
    for p in partials {
        for (h, c) in hist.counts.iter_mut().zip(p) {
            *h += c;
        }
    }
    hist.total_starts = a.len() as u64;
    hist.total_stops = b.len() as u64;
    Ok(hist)
}

/// Hanbury Brown-Twiss autocorrelation of one channel: each tag is routed to
/// one of two virtual outputs with probability ½ and the outputs are
/// cross-correlated.
///
/// The routing bit of tag `i` is a hash of `(splitter_seed, i)`, so the split
/// is reproducible and independent of chunking.
pub fn autocorrelate_split(
    stream: &TagStream,
    ch: u8,
    splitter_seed: u64,
    bin_width: u64,
    delay_range: (i64, i64),
    exec: Execution,
) -> Result<Histogram> {
    check_sorted(stream)?;
    if ch >= stream.channel_count() {
        return Err(Error::UnknownChannel(ch));
    }
    let times = stream.channel_times(ch);
    let (mut a, mut b) = (Vec::with_capacity(times.len() / 2), Vec::with_capacity(times.len() / 2));
    for (i, &t) in times.iter().enumerate() {
        if splitmix64(splitter_seed ^ splitmix64(i as u64)) & 1 == 0 {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    let mut h = correlate_times(&a, &b, bin_width, delay_range, exec)?;
    h.acquisition_s = stream.acquisition_s();
    h.tick_ps = stream.resolution() as u64;
    Ok(h)
}

fn check_sorted(stream: &TagStream) -> Result<()> {
    if let Some(i) = stream.tags().windows(2).position(|w| w[1].time < w[0].time) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    Ok(())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Tag;

    #[test]
    fn hand_enumerated_example() {
        let s = TagStream::new(vec![Tag::new(0, 0), Tag::new(100, 1), Tag::new(5000, 1)], 1, 2).unwrap();
        let h = cross_correlate(&s, 0, 1, 100, (-1000, 1000), Execution::Sequential).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[h.bin_of(100).unwrap()], 1);
        assert_eq!(h.bin_start(h.bin_of(100).unwrap()), 100);
    }

    #[test]
    fn single_channel_gives_zero_histogram() {
        let tags = (0..50).map(|i| Tag::new(i * 10, 0)).collect();
        let s = TagStream::new(tags, 1, 2).unwrap();
        let h = cross_correlate(&s, 0, 1, 10, (-100, 100), Execution::Parallel).unwrap();
        assert_eq!(h.total(), 0);
        assert_eq!(h.total_starts, 50);
    }

    #[test]
    fn unknown_channel() {
        let s = TagStream::new(vec![Tag::new(0, 0)], 1, 2).unwrap();
        assert!(matches!(
            cross_correlate(&s, 0, 5, 10, (-100, 100), Execution::Sequential),
            Err(Error::UnknownChannel(5))
        ));
    }

    #[test]
    fn split_is_balanced_and_reproducible() {
        let tags = (0..10_000).map(|i| Tag::new(i * 1000, 0)).collect();
        let s = TagStream::new(tags, 1, 1).unwrap();
        let h1 = autocorrelate_split(&s, 0, 7, 1000, (-5000, 5000), Execution::Sequential).unwrap();
        let h2 = autocorrelate_split(&s, 0, 7, 1000, (-5000, 5000), Execution::Parallel).unwrap();
        assert_eq!(h1, h2);
        let frac = h1.total_starts as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02);
    }
}
