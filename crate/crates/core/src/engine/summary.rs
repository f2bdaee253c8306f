use serde::{Deserialize, Serialize};

use super::histogram::Histogram;
use crate::error::{Error, Result};

/// Default coincidence window, ps (nine 81 ps bins).
pub const DEFAULT_WINDOW_PS: u64 = 729;
/// Default half-width excluded around a peak when estimating accidentals, ps.
pub const DEFAULT_GUARD_PS: u64 = 200_000;
/// Peak search radius around zero delay, ps.
pub const PEAK_SEARCH_PS: f64 = 5_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub window_ps: u64,
    /// Sidebands start `max(3·window, guard)` away from the peak.
    pub guard_ps: u64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            window_ps: DEFAULT_WINDOW_PS,
            guard_ps: DEFAULT_GUARD_PS,
        }
    }
}

/// Peak and accidental statistics of a coincidence histogram.
///
/// `car` is peak over accidentals, so an uncorrelated histogram gives 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSummary {
    pub peak_counts: u64,
    pub peak_center_ps: f64,
    pub accidental_counts_per_bin: f64,
    pub sideband_bins: usize,
    pub window_ps: u64,
    pub window_bins: usize,
    /// Raw coincidences in the window per second.
    pub coincidence_rate: f64,
    /// Accidental-subtracted coincidences per second.
    pub net_coincidence_rate: f64,
    pub car: f64,
    pub car_sigma: f64,
}

impl CoincidenceSummary {
    /// Expected accidental counts inside the window.
    pub fn accidentals_in_window(&self) -> f64 {
        self.accidental_counts_per_bin * self.window_bins as f64
    }
}

pub fn coincidence_summary(hist: &Histogram, opts: &SummaryOptions) -> Result<CoincidenceSummary> {
    let bw = hist.bin_width;
    if opts.window_ps == 0 || !opts.window_ps.is_multiple_of(bw) {
        return Err(Error::invalid(
            "window_ps",
            format!("must be a positive multiple of the {bw} ps bin width"),
        ));
    }
    let span = (hist.delay_max - hist.delay_min) as u64;
    if opts.window_ps > span {
        return Err(Error::invalid("window_ps", "wider than the histogram range"));
    }
    let n_w = (opts.window_ps / bw) as usize;

    let j_max = (0..hist.len())
        .filter(|&j| hist.bin_center(j).abs() <= PEAK_SEARCH_PS)
        .max_by_key(|&j| (hist.counts[j], std::cmp::Reverse(j)))
        .ok_or_else(|| Error::Statistics("no bins near zero delay".into()))?;

    // centroid over ±window around the maximum, in bin-index units
    let reach = n_w as isize;
    let (mut m0, mut m1) = (0.0, 0.0);
    for j in (j_max as isize - reach)..=(j_max as isize + reach) {
        if j < 0 || j as usize >= hist.len() {
            continue;
        }
        let c = hist.counts[j as usize] as f64;
        m0 += c;
        m1 += c * (j as f64 + 0.5);
    }
    let x = if m0 > 0.0 { m1 / m0 } else { j_max as f64 + 0.5 };
    let start = ((x - n_w as f64 / 2.0).round().max(0.0) as usize).min(hist.len() - n_w);
    let peak_counts: u64 = hist.counts[start..start + n_w].iter().sum();
    let center_ps = hist.delay_min as f64 + x * bw as f64;

    let exclusion = (3 * opts.window_ps).max(opts.guard_ps) as f64;
    let (mut side_sum, mut side_bins) = (0u64, 0usize);
    for j in 0..hist.len() {
        if (hist.bin_center(j) - center_ps).abs() > exclusion {
            side_sum += hist.counts[j];
            side_bins += 1;
        }
    }
    if side_bins == 0 {
        return Err(Error::Statistics(format!(
            "no sideband bins beyond ±{exclusion} ps from the peak; widen the delay range"
        )));
    }
    let acc_per_bin = side_sum as f64 / side_bins as f64;
    let acc_window = acc_per_bin * n_w as f64;
    let car = if acc_window > 0.0 {
        peak_counts as f64 / acc_window
    } else {
        f64::INFINITY
    };
    let car_sigma = if peak_counts > 0 && side_sum > 0 {
        car * (1.0 / peak_counts as f64 + 1.0 / side_sum as f64).sqrt()
    } else {
        f64::INFINITY
    };
    let t = hist.acquisition_s;
    let (rate, net) = if t > 0.0 {
        (peak_counts as f64 / t, (peak_counts as f64 - acc_window) / t)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CoincidenceSummary {
        peak_counts,
        peak_center_ps: center_ps,
        accidental_counts_per_bin: acc_per_bin,
        sideband_bins: side_bins,
        window_ps: opts.window_ps,
        window_bins: n_w,
        coincidence_rate: rate,
        net_coincidence_rate: net,
        car,
        car_sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinPeaks {
    pub left: f64,
    pub center: f64,
    pub right: f64,
    pub window_ps: f64,
}

/// Integrates windows of `fraction·Δt` centred at `-Δt`, `0` and `+Δt`.
/// Δt is rarely a whole number of bins, so the windows integrate the
/// interpolated density rather than whole bins.
pub fn timebin_peaks(hist: &Histogram, delta_t_ns: f64, fraction: f64) -> Result<TimeBinPeaks> {
    let dt = delta_t_ns * 1e3;
    check_timebin_range(hist, dt, fraction)?;
    let w = fraction * dt;
    let at = |c: f64| hist.integrate_interpolated(c - w / 2.0, c + w / 2.0);
    Ok(TimeBinPeaks {
        left: at(-dt),
        center: at(0.0),
        right: at(dt),
        window_ps: w,
    })
}

/// Mean counts in the same windows placed at `±k·Δt` for `k >= min_k`.
/// With `min_k >= 2` only photons from different pulses contribute. Returns
/// the mean per window and the number of windows used.
pub fn timebin_accidentals(hist: &Histogram, delta_t_ns: f64, fraction: f64, min_k: usize) -> Result<(f64, usize)> {
    let dt = delta_t_ns * 1e3;
    check_timebin_range(hist, dt, fraction)?;
    let w = fraction * dt;
    let (mut sum, mut n) = (0.0, 0usize);
    for k in min_k.max(1).. {
        let c = k as f64 * dt;
        let fits = |c: f64| c - w / 2.0 >= hist.delay_min as f64 && c + w / 2.0 <= hist.delay_max as f64;
        let (pos, neg) = (fits(c), fits(-c));
        if !pos && !neg {
            break;
        }
        for (ok, cc) in [(pos, c), (neg, -c)] {
            if ok {
                sum += hist.integrate_interpolated(cc - w / 2.0, cc + w / 2.0);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Statistics(format!(
            "delay range holds no windows at or beyond {min_k}·Δt"
        )));
    }
    Ok((sum / n as f64, n))
}

/// Phase-independent counts expected in the central window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinBackground {
    /// Uncorrelated photons, from windows at `|k| >= 3`.
    pub accidental: f64,
    /// Tails of the two satellite peaks reaching into the central window.
    /// Each satellite reaches the window at `±2Δt` as far as it reaches the
    /// centre, so this is the excess of those two windows over accidentals.
    pub satellite_tails: f64,
}

impl TimeBinBackground {
    pub fn total(&self) -> f64 {
        self.accidental + self.satellite_tails
    }
}

pub fn timebin_background(hist: &Histogram, delta_t_ns: f64, fraction: f64) -> Result<TimeBinBackground> {
    let dt = delta_t_ns * 1e3;
    let w = fraction * dt;
    if (hist.delay_min as f64) > -(2.0 * dt + w / 2.0) || (hist.delay_max as f64) < 2.0 * dt + w / 2.0 {
        return Err(Error::invalid(
            "delay_range",
            format!("must cover ±{:.0} ps", 2.0 * dt + w / 2.0),
        ));
    }
    let (accidental, _) = timebin_accidentals(hist, delta_t_ns, fraction, 3)?;
    let at = |c: f64| hist.integrate_interpolated(c - w / 2.0, c + w / 2.0);
    let satellite_tails = at(2.0 * dt) + at(-2.0 * dt) - 2.0 * accidental;
    Ok(TimeBinBackground {
        accidental,
        satellite_tails,
    })
}

fn check_timebin_range(hist: &Histogram, dt: f64, fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("peak_fraction", "must lie in (0, 1]"));
    }
    if (hist.delay_min as f64) > -1.5 * dt || (hist.delay_max as f64) < 1.5 * dt {
        return Err(Error::invalid(
            "delay_range",
            format!("must cover ±1.5·Δt = ±{:.0} ps", 1.5 * dt),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(level: u64, bw: u64, half: i64) -> Histogram {
        let mut h = Histogram::new(bw, -half, half).unwrap();
        h.counts.iter_mut().for_each(|c| *c = level);
        h.acquisition_s = 1.0;
        h
    }

    #[test]
    fn synthetic_peak_car() {
        let mut h = flat(10, 100, 50_000);
        let j = h.bin_of(0).unwrap();
        h.counts[j] = 1000;
        let s = coincidence_summary(
            &h,
            &SummaryOptions {
                window_ps: 100,
                guard_ps: 1000,
            },
        )
        .unwrap();
        assert_eq!(s.peak_counts, 1000);
        assert!((s.car - 100.0).abs() < 1e-12);
        assert!((s.coincidence_rate - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn flat_histogram_gives_unit_car() {
        let h = flat(7, 81, 81 * 4000);
        let s = coincidence_summary(&h, &SummaryOptions::default()).unwrap();
        assert!((s.car - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sidebands_are_an_error() {
        let h = flat(7, 81, 81 * 20);
        let err = coincidence_summary(&h, &SummaryOptions::default()).unwrap_err();
        assert_eq!(err.category(), crate::error::Category::Statistics);
        assert!(coincidence_summary(
            &h,
            &SummaryOptions {
                window_ps: 100,
                guard_ps: 0
            }
        )
        .is_err());
    }

    #[test]
    fn timebin_windows() {
        let h = flat(3, 10, 5000);
        let p = timebin_peaks(&h, 1.0, 1.0 / 3.0).unwrap();
        assert!((p.left - p.center).abs() < 1e-9);
        assert!((p.right - p.center).abs() < 1e-9);
        let (acc, n) = timebin_accidentals(&h, 1.0, 1.0 / 3.0, 2).unwrap();
        assert_eq!(n, 6);
        assert!((acc - p.center).abs() < 1e-9);
        let b = timebin_background(&h, 1.0, 1.0 / 3.0).unwrap();
        assert!((b.total() - p.center).abs() < 1e-9);
        assert!(b.satellite_tails.abs() < 1e-9);
        let narrow = flat(3, 10, 1000);
        assert!(timebin_peaks(&narrow, 1.0, 1.0 / 3.0).is_err());
    }
}
