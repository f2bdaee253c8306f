use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::device::{non_negative, unit_interval};
use crate::error::Result;
use crate::stream::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Nonparalyzable dead time, ns.
    pub dead_time_ns: f64,
    /// Gaussian timing jitter (standard deviation), ps.
    pub jitter_ps: f64,
}

impl DetectorConfig {
    /// A perfect detector.
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            dark_rate: 0.0,
            dead_time_ns: 0.0,
            jitter_ps: 0.0,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        unit_interval(&format!("{prefix}.efficiency"), self.efficiency)?;
        non_negative(&format!("{prefix}.dark_rate"), self.dark_rate)?;
        non_negative(&format!("{prefix}.dead_time_ns"), self.dead_time_ns)?;
        non_negative(&format!("{prefix}.jitter_ps"), self.jitter_ps)
    }

    pub(crate) fn jitter<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        if self.jitter_ps > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            t + g * self.jitter_ps
        } else {
            t
        }
    }
}

/// Measured rate of a nonparalyzable detector with true input rate
/// `true_rate` (1/s) and dead time `dead_time_ns`.
pub fn saturated_rate(true_rate: f64, dead_time_ns: f64) -> f64 {
    true_rate / (1.0 + true_rate * dead_time_ns * 1e-9)
}

/// Inverse of [`saturated_rate`]: recovers the input rate from a measured one.
pub fn dead_time_corrected_rate(measured_rate: f64, dead_time_ns: f64) -> f64 {
    let live = 1.0 - measured_rate * dead_time_ns * 1e-9;
    if live <= 0.0 {
        f64::INFINITY
    } else {
        measured_rate / live
    }
}

/// Probability that two nonparalyzable detectors with equal dead time are
/// both live, when they share Poisson pair arrivals at `pair_rate` on top of
/// independent Poisson arrivals `other_a` and `other_b` (all in 1/s).
///
/// A shared arrival kills both detectors together, so they recover together
/// and the joint live fraction is larger than the product of the single
/// live fractions.
pub fn joint_live_fraction(pair_rate: f64, other_a: f64, other_b: f64, dead_time_ns: f64) -> f64 {
    let tau = dead_time_ns * 1e-9;
    if tau == 0.0 {
        return 1.0;
    }
    let (g, na, nb) = (pair_rate.max(0.0), other_a.max(0.0), other_b.max(0.0));
    let (la, lb) = (g + na, g + nb);
    let k = la - lb;
    let e = |y: f64| if (k * y).abs() < 1e-12 { y } else { (k * y).exp_m1() / k };
    // densities with the LL state normalised to one: u(y) while only `a` is
    // live and `b` has y left; w(y) = v(tau - y) the mirror case
    let u0 = (nb + lb * na * e(tau)) / (1.0 + la * e(tau));
    let c = u0 - na;
    let slope = k * u0 + lb * c;
    const STEPS: usize = 2000;
    let h = tau / STEPS as f64;
    let (mut iu, mut iw, mut iuy, mut iwy) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..=STEPS {
        let y = j as f64 * h;
        let wt = if j == 0 || j == STEPS { 0.5 * h } else { h };
        let u = u0 + slope * e(y);
        let w = u - c;
        iu += wt * u;
        iw += wt * w;
        iuy += wt * u * y;
        iwy += wt * w * (tau - y);
    }
    let dead_both = g * tau + la * iuy + lb * iwy;
    1.0 / (1.0 + iu + iw + dead_both)
}

/// Drops tags that arrive within `dead_time_ps` of the last accepted tag on
/// the same channel. Input must be time ordered.
pub fn apply_dead_time(tags: Vec<Tag>, dead_time_ps: &[u64]) -> Vec<Tag> {
    if dead_time_ps.iter().all(|&d| d == 0) {
        return tags;
    }
    let mut next_live = vec![0u64; dead_time_ps.len()];
    let mut armed = vec![false; dead_time_ps.len()];
    tags.into_iter()
        .filter(|t| {
            let c = t.channel as usize;
            if armed[c] && t.time < next_live[c] {
                return false;
            }
            armed[c] = true;
            next_live[c] = t.time + dead_time_ps[c];
            true
        })
        .collect()
}
