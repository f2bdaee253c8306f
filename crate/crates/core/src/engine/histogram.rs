use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coincidence counts versus delay `t_b - t_a`.
///
/// Bin `j` covers `[min + j·w, min + (j+1)·w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    pub delay_min: i64,
    pub delay_max: i64,
    pub counts: Vec<u64>,
    pub total_starts: u64,
    pub total_stops: u64,
    pub acquisition_s: f64,
    /// Timestamp tick of the correlated stream, ps. Delays are whole ticks.
    #[serde(default = "one_tick")]
    pub tick_ps: u64,
}

fn one_tick() -> u64 {
    1
}

impl Histogram {
    pub fn new(bin_width: u64, delay_min: i64, delay_max: i64) -> Result<Self> {
        let n = bin_count(bin_width, delay_min, delay_max)?;
        Ok(Histogram {
            bin_width,
            delay_min,
            delay_max,
            counts: vec![0; n],
            total_starts: 0,
            total_stops: 0,
            acquisition_s: 0.0,
            tick_ps: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Left edge of bin `j`, ps.
    pub fn bin_start(&self, j: usize) -> i64 {
        self.delay_min + j as i64 * self.bin_width as i64
    }

    pub fn bin_center(&self, j: usize) -> f64 {
        self.bin_start(j) as f64 + self.bin_width as f64 / 2.0
    }

    /// Bin holding delay `d`, if inside the range.
    pub fn bin_of(&self, d: i64) -> Option<usize> {
        if d < self.delay_min || d >= self.delay_max {
            None
        } else {
            Some(((d - self.delay_min) as u64 / self.bin_width) as usize)
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Merges the coarser bins of `factor` neighbours.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.counts.len().is_multiple_of(factor) {
            return Err(Error::invalid("rebin factor", "must divide the number of bins"));
        }
        let counts = self.counts.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(Histogram {
            bin_width: self.bin_width * factor as u64,
            counts,
            ..self.clone()
        })
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_width != other.bin_width
            || self.delay_min != other.delay_min
            || self.delay_max != other.delay_max
            || self.tick_ps != other.tick_ps
        {
            return Err(Error::invalid("histogram", "binning mismatch"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_starts += other.total_starts;
        self.total_stops += other.total_stops;
        Ok(())
    }

    /// Sum of counts in bins whose centres lie in `[lo, hi)`.
    pub fn integrate(&self, lo: f64, hi: f64) -> u64 {
        (0..self.len())
            .filter(|&j| {
                let c = self.bin_center(j);
                c >= lo && c < hi
            })
            .map(|j| self.counts[j])
            .sum()
    }

    /// Integral over `[lo, hi)` of the count density interpolated linearly
    /// between bin anchors. The anchor is the mean delay a bin can hold, so
    /// for one-tick bins it is the left edge, where all its counts sit.
    ///
    /// Unlike [`Histogram::integrate`], windows of equal width capture equal
    /// shares of equal peaks wherever they fall relative to the bin grid.
    pub fn integrate_interpolated(&self, lo: f64, hi: f64) -> f64 {
        let n = self.len();
        if hi <= lo || n == 0 {
            return 0.0;
        }
        let w = self.bin_width as f64;
        let shift = self.bin_width.saturating_sub(self.tick_ps.max(1)) as f64 / 2.0;
        let anchor = |j: usize| self.bin_start(j) as f64 + shift;
        let density = |j: usize| self.counts[j] as f64 / w;
        let (first, last) = (anchor(0), anchor(n - 1));
        let mut total = 0.0;
        // flat beyond the outermost anchors
        total += density(0) * (hi.min(first) - lo).max(0.0);
        total += density(n - 1) * (hi - lo.max(last)).max(0.0);
        let j_lo = (((lo - first) / w).floor().max(0.0) as usize).min(n - 1);
        let j_hi = (((hi - first) / w).ceil().max(0.0) as usize).min(n - 1);
        for j in j_lo..j_hi {
            let (a, b) = (anchor(j), anchor(j + 1));
            let (s, e) = (a.max(lo), b.min(hi));
            if e > s {
                let (da, db) = (density(j), density(j + 1));
                let at = |x: f64| da + (db - da) * (x - a) / w;
                total += 0.5 * (at(s) + at(e)) * (e - s);
            }
        }
        total
    }

    /// Number of bins whose centres lie in `[lo, hi)`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> usize {
        (0..self.len())
            .filter(|&j| {
                let c = self.bin_center(j);
                c >= lo && c < hi
            })
            .count()
    }
}

pub(crate) fn bin_count(bin_width: u64, delay_min: i64, delay_max: i64) -> Result<usize> {
    if bin_width == 0 {
        return Err(Error::invalid("bin_width", "must be positive"));
    }
    if delay_max <= delay_min {
        return Err(Error::invalid("delay_range", "max must exceed min"));
    }
    let span = (delay_max - delay_min) as u64;
    if !span.is_multiple_of(bin_width) {
        return Err(Error::invalid(
            "delay_range",
            format!("span {span} ps is not a multiple of the {bin_width} ps bin width"),
        ));
    }
    Ok((span / bin_width) as usize)
}
