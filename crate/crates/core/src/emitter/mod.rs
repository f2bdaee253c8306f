//! Synthetic time-tag generation for CW pair emission and for the pulsed
//! sequential time-bin arrangement.
//!
//! Work is split into fixed-length time segments. Each segment draws from its
//! own xoshiro256++ generator seeded from `(seed, segment)`, so the output
//! depends only on the seed and never on how many threads ran the segments.

mod cw;
mod detector;
pub mod thermal;
mod timebin;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

pub use cw::simulate_cw;
pub use detector::{apply_dead_time, dead_time_corrected_rate, joint_live_fraction, saturated_rate, DetectorConfig};
pub use timebin::{simulate_timebin, TimeBinConfig};

use crate::device::{non_negative, positive};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::stream::{Origin, Tag, TagStream, DEFAULT_RESOLUTION_PS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pump_power_mw: f64,
    /// Generated pairs per second per mW² (before any loss).
    pub pair_rate_coefficient: f64,
    /// Linear noise at the detector, counts/s/mW.
    pub linear_noise_signal: f64,
    pub linear_noise_idler: f64,
    /// Effective number of spectral modes; `inf` disables bunching.
    pub schmidt_number: f64,
    /// Photon coherence time, ps. Taken from the device when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_time_ps: Option<f64>,
    pub duration_s: f64,
    pub rng_seed: u64,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        non_negative("source.pump_power_mw", self.pump_power_mw)?;
        non_negative("source.pair_rate_coefficient", self.pair_rate_coefficient)?;
        non_negative("source.linear_noise_signal", self.linear_noise_signal)?;
        non_negative("source.linear_noise_idler", self.linear_noise_idler)?;
        if self.schmidt_number.is_nan() || self.schmidt_number < 1.0 {
            return Err(Error::invalid("source.schmidt_number", "must be >= 1 (or inf)"));
        }
        if let Some(tc) = self.coherence_time_ps {
            positive("source.coherence_time_ps", tc)?;
        }
        positive("source.duration_s", self.duration_s)
    }

    pub(crate) fn coherence_time(&self) -> Result<f64> {
        self.coherence_time_ps
            .ok_or_else(|| Error::invalid("source.coherence_time_ps", "not set and no device to derive it from"))
    }

    /// Generated pairs per second at the configured pump power.
    pub fn pair_rate(&self) -> f64 {
        self.pair_rate_coefficient * self.pump_power_mw * self.pump_power_mw
    }
}

/// Knobs that shape the output but not the physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    /// Output tick, ps.
    pub resolution_ps: u32,
    /// Length of one independently seeded generation segment, s.
    pub segment_s: f64,
    /// Refuse runs expected to produce more records than this.
    pub max_tags: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            resolution_ps: DEFAULT_RESOLUTION_PS,
            segment_s: 0.01,
            max_tags: 200_000_000,
            execution: Execution::default(),
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.resolution_ps == 0 {
            return Err(Error::invalid("simulation.resolution_ps", "must be positive"));
        }
        positive("simulation.segment_s", self.segment_s)
    }

    fn check_budget(&self, expected: f64) -> Result<()> {
        if expected > self.max_tags as f64 {
            return Err(Error::SizeLimit {
                expected: expected as u64,
                budget: self.max_tags,
            });
        }
        Ok(())
    }
}

/// Raw detection before quantization: time in ps and channel.
type Raw = (f64, u8);

struct SegmentOutput {
    raw: Vec<Raw>,
    exceedances: u64,
}

type SimRng = Xoshiro256PlusPlus;

fn segment_rng(seed: u64, segment: usize) -> SimRng {
    SimRng::seed_from_u64(crate::experiments::derive_seed(seed, segment as u64))
}

/// Runs `gen(t0, t1, rng)` over `[0, duration)` in fixed segments, then
/// quantizes, orders, and applies per-channel dead time.
fn run_segments<F>(
    duration_s: f64,
    seed: u64,
    opts: &SimOptions,
    dead_time_ns: [f64; 2],
    gen: F,
) -> Result<(TagStream, u64)>
where
    F: Fn(f64, f64, &mut SimRng) -> SegmentOutput + Sync + Send,
{
    opts.validate()?;
    let duration_ps = duration_s * 1e12;
    let seg_ps = opts.segment_s * 1e12;
    let n_seg = (duration_ps / seg_ps).ceil().max(1.0) as usize;
    let res = opts.resolution_ps as u64;

    let parts = map_indexed(opts.execution, n_seg, |s| {
        let t0 = s as f64 * seg_ps;
        let t1 = ((s + 1) as f64 * seg_ps).min(duration_ps);
        let mut rng = segment_rng(seed, s);
        let out = gen(t0, t1, &mut rng);
        let mut tags: Vec<Tag> = out
            .raw
            .into_iter()
            .filter(|&(t, _)| t >= 0.0 && t < duration_ps)
            .map(|(t, c)| Tag::new((t as u64) / res * res, c))
            .collect();
        tags.sort_unstable();
        (tags, out.exceedances)
    });

    let exceedances = parts.iter().map(|p| p.1).sum();
    let runs: Vec<Vec<Tag>> = parts.into_iter().map(|p| p.0).collect();
    // spill-over across segment edges breaks global order, so merge
    let merged = crate::stream::merge_sorted(runs);
    let dead_ps = dead_time_ns.map(|d| (d * 1e3).round() as u64);
    let tags = apply_dead_time(merged, &dead_ps);
    Ok((
        TagStream::from_parts_unchecked(tags, opts.resolution_ps, 2),
        exceedances,
    ))
}

fn origin(mode: &str, seed: u64, duration_s: f64, exceedances: u64) -> Origin {
    Origin {
        mode: mode.to_string(),
        seed: Some(seed),
        config_hash: None,
        duration_s: Some(duration_s),
        bound_exceedances: exceedances,
    }
}

/// Fills `out` with a homogeneous Poisson process on `[t0, t1)` (ps).
fn poisson_times<R: rand::Rng + ?Sized>(
    rate_per_s: f64,
    t0: f64,
    t1: f64,
    channel: u8,
    rng: &mut R,
    out: &mut Vec<Raw>,
) {
    use rand_distr::{Distribution, Poisson};
    let mean = rate_per_s * (t1 - t0) * 1e-12;
    if mean <= 0.0 {
        return;
    }
    let n = Poisson::new(mean).expect("finite mean").sample(rng) as usize;
    out.reserve(n);
    for _ in 0..n {
        out.push((t0 + rng.random::<f64>() * (t1 - t0), channel));
    }
}

/// Signed draw from a double-sided exponential with scale `tau`.
fn laplace<R: rand::Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(rand_distr::Exp1);
    if rng.random::<bool>() {
        e * tau
    } else {
        -e * tau
    }
}
