//! End-to-end runs: simulate, correlate, estimate. Each mirrors one
//! characterisation of the source.

use std::f64::consts::PI;

use serde::Serialize;

use crate::device::{match_comb_to_grid, CombAlignment, RingDevice};
use crate::emitter::{simulate_cw, simulate_timebin, DetectorConfig, SimOptions, SourceConfig};
use crate::engine::{
    autocorrelate_split, coincidence_summary, cross_correlate, timebin_background, timebin_peaks, Histogram,
};
use crate::error::{Error, Result};
use crate::estimators::{brightness, window_capture, CarModel, PowerSweep, SweepAnalysis, SweepPoint, ThermalExcess};
use crate::exec::Execution;
use crate::fit::{fit_g2, fit_visibility, G2Fit, PeakShape, Period, VisibilityFit};
use crate::io::ExperimentConfig;
use crate::stream::{TagStream, IDLER, SIGNAL};

/// Central window of the time-bin analysis as a fraction of Δt.
pub const TIMEBIN_WINDOW_FRACTION: f64 = 0.25;
/// Half range of time-bin histograms, ps (covers ±5Δt at 750 MHz).
pub const TIMEBIN_RANGE_PS: i64 = 81 * 100;

/// Independent seed for sub-run `index` of a run seeded with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sim_options(cfg: &ExperimentConfig, exec: Execution) -> SimOptions {
    SimOptions {
        execution: exec,
        ..cfg.simulation
    }
}

/// Raw CW tags for the configured source, stamped with the config hash.
pub fn cw_stream(cfg: &ExperimentConfig, exec: Execution) -> Result<TagStream> {
    let mut stream = simulate_cw(
        &cfg.source(),
        &cfg.detectors.signal,
        &cfg.detectors.idler,
        &cfg.active_channel_pair(),
        &sim_options(cfg, exec),
    )?;
    stream.origin.config_hash = Some(cfg.hash());
    Ok(stream)
}

/// Raw time-bin tags for the configured interferometer.
pub fn timebin_stream(cfg: &ExperimentConfig, exec: Execution) -> Result<TagStream> {
    let tb = cfg
        .timebin
        .as_ref()
        .ok_or_else(|| Error::invalid("timebin", "section missing"))?;
    let mut stream = simulate_timebin(
        &cfg.timebin_source()?,
        &tb.interferometer,
        &cfg.detectors.signal,
        &cfg.detectors.idler,
        &sim_options(cfg, exec),
    )?;
    stream.origin.config_hash = Some(cfg.hash());
    Ok(stream)
}

/// Closed-form CAR curve for the configured link.
pub fn car_model(cfg: &ExperimentConfig) -> Result<CarModel> {
    let src = cfg.source();
    let pair = cfg.active_channel_pair();
    let (ds, di) = (&cfg.detectors.signal, &cfg.detectors.idler);
    if (ds.dead_time_ns - di.dead_time_ns).abs() > 1e-9 {
        log::warn!("detector dead times differ; the CAR curve uses the signal arm value");
    }
    let jitter = ds.jitter_ps.hypot(di.jitter_ps);
    let tau = src.coherence_time_ps.expect("filled from device");
    let bins = (cfg.analysis.window_ps / cfg.analysis.bin_width_ps) as usize;
    let capture = window_capture(tau, jitter, cfg.simulation.resolution_ps as f64, bins)?;
    Ok(CarModel {
        a_signal: src.linear_noise_signal,
        a_idler: src.linear_noise_idler,
        b_signal: pair.b_signal,
        b_idler: pair.b_idler,
        dark_signal: ds.dark_rate,
        dark_idler: di.dark_rate,
        coincidence_coefficient: pair.b_signal * pair.transmission_idler * di.efficiency * capture,
        window_capture: capture,
        window_ps: cfg.analysis.window_ps as f64,
        dead_time_ns: ds.dead_time_ns,
        thermal: cfg.analysis.thermal_car_correction.then_some(ThermalExcess {
            schmidt_number: src.schmidt_number,
            coherence_time_ps: tau,
        }),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub sweep: PowerSweep,
    pub analysis: SweepAnalysis,
    pub predicted_car: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Simulates and analyses one CW point.
pub fn cw_point(
    cfg: &ExperimentConfig,
    power_mw: f64,
    duration_s: f64,
    seed: u64,
    exec: Execution,
) -> Result<(SweepPoint, Histogram)> {
    let source = SourceConfig {
        pump_power_mw: power_mw,
        duration_s,
        rng_seed: seed,
        ..cfg.source()
    };
    let stream = simulate_cw(
        &source,
        &cfg.detectors.signal,
        &cfg.detectors.idler,
        &cfg.active_channel_pair(),
        &sim_options(cfg, exec),
    )?;
    let a = &cfg.analysis;
    let hist = cross_correlate(&stream, SIGNAL, IDLER, a.bin_width_ps, (-a.range_ps, a.range_ps), exec)?;
    let s = coincidence_summary(&hist, &a.summary_options())?;
    Ok((
        SweepPoint {
            pump_power_mw: power_mw,
            singles_signal: stream.count(SIGNAL) as f64 / duration_s,
            singles_idler: stream.count(IDLER) as f64 / duration_s,
            coincidence_rate: s.coincidence_rate,
            net_coincidence_rate: s.net_coincidence_rate,
            car: s.car,
            car_sigma: s.car_sigma,
            acquisition_s: duration_s,
        },
        hist,
    ))
}

pub fn power_sweep(
    cfg: &ExperimentConfig,
    powers_mw: &[f64],
    durations_s: &[f64],
    exec: Execution,
) -> Result<SweepRun> {
    if durations_s.len() != powers_mw.len() && durations_s.len() != 1 {
        return Err(Error::invalid("durations", "need one duration or one per power"));
    }
    let mut points = Vec::with_capacity(powers_mw.len());
    let mut seeds = Vec::with_capacity(powers_mw.len());
    for (i, &p) in powers_mw.iter().enumerate() {
        let d = if durations_s.len() == 1 {
            durations_s[0]
        } else {
            durations_s[i]
        };
        let seed = derive_seed(cfg.source.rng_seed, i as u64);
        log::info!("sweep point {p} mW for {d} s");
        points.push(cw_point(cfg, p, d, seed, exec)?.0);
        seeds.push(seed);
    }
    let sweep = PowerSweep {
        points,
        dead_time_ns: cfg.detectors.signal.dead_time_ns,
    };
    let analysis = sweep.analyze(
        [cfg.detectors.signal.dark_rate, cfg.detectors.idler.dark_rate],
        cfg.analysis.coincidence_fit_max_power_mw,
    )?;
    let model = car_model(cfg)?;
    let predicted_car = powers_mw
        .iter()
        .map(|&p| model.predict(p).map(|c| c.car))
        .collect::<Result<_>>()?;
    Ok(SweepRun {
        sweep,
        analysis,
        predicted_car,
        seeds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PurityRun {
    pub g2: G2Fit,
    pub detected_rate: f64,
    pub seed: u64,
    #[serde(skip)]
    pub histogram: Histogram,
}

/// Unheralded `g2` of the signal arm through a 50:50 split. Detectors are
/// ideal here: the split happens before detection, so dead time on the
/// shared channel would otherwise carve a hole around zero delay.
pub fn purity(cfg: &ExperimentConfig, schmidt_number: f64, exec: Execution) -> Result<PurityRun> {
    let plan = &cfg.report;
    let base = cfg.source();
    let p = base.pump_power_mw.max(1.0);
    let source = SourceConfig {
        pump_power_mw: p,
        pair_rate_coefficient: plan.purity_rate / (p * p),
        linear_noise_signal: 0.0,
        linear_noise_idler: 0.0,
        schmidt_number,
        duration_s: plan.purity_duration_s,
        rng_seed: derive_seed(base.rng_seed, 1000),
        ..base
    };
    let mut pair = cfg.active_channel_pair();
    pair.transmission_signal = 1.0;
    pair.transmission_idler = 1e-9;
    let ideal = DetectorConfig::ideal();
    let stream = simulate_cw(&source, &ideal, &ideal, &pair, &sim_options(cfg, exec))?;
    let tau = source.coherence_time_ps.expect("filled from device");
    let half = range_for(tau, cfg.analysis.bin_width_ps);
    let hist = autocorrelate_split(
        &stream,
        SIGNAL,
        source.rng_seed,
        cfg.analysis.bin_width_ps,
        (-half, half),
        exec,
    )?;
    let g2 = fit_g2(&hist, cfg.analysis.g2_shape)?;
    Ok(PurityRun {
        g2,
        detected_rate: stream.count(SIGNAL) as f64 / source.duration_s,
        seed: source.rng_seed,
        histogram: hist,
    })
}

/// About ten decay times either side, in whole bins.
fn range_for(tau_ps: f64, bin: u64) -> i64 {
    let bins = (10.0 * tau_ps / bin as f64).ceil().max(20.0) as i64;
    bins * bin as i64
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRun {
    pub fit: G2Fit,
    pub coherence_time_ps: f64,
    pub coherence_time_sigma_ps: f64,
    /// `1/(2π τ)`.
    pub bandwidth_mhz: f64,
    pub bandwidth_sigma_mhz: f64,
    pub seed: u64,
    #[serde(skip)]
    pub histogram: Histogram,
}

/// Signal-idler cross-correlation of a lossless link, fitted with a double
/// exponential. Detector jitter is kept; dead time and dark counts are not.
pub fn coherence_decay(cfg: &ExperimentConfig, exec: Execution) -> Result<DecayRun> {
    let plan = &cfg.report;
    let base = cfg.source();
    let p = base.pump_power_mw.max(1.0);
    let source = SourceConfig {
        pump_power_mw: p,
        pair_rate_coefficient: plan.decay_pair_rate / (p * p),
        linear_noise_signal: 0.0,
        linear_noise_idler: 0.0,
        duration_s: plan.decay_duration_s,
        rng_seed: derive_seed(base.rng_seed, 2000),
        ..base
    };
    let mut pair = cfg.active_channel_pair();
    pair.transmission_signal = 1.0;
    pair.transmission_idler = 1.0;
    let det = |d: &DetectorConfig| DetectorConfig {
        jitter_ps: d.jitter_ps,
        ..DetectorConfig::ideal()
    };
    let (ds, di) = (det(&cfg.detectors.signal), det(&cfg.detectors.idler));
    let stream = simulate_cw(&source, &ds, &di, &pair, &sim_options(cfg, exec))?;
    let tau = source.coherence_time_ps.expect("filled from device");
    let half = range_for(tau, cfg.analysis.bin_width_ps);
    let hist = cross_correlate(&stream, SIGNAL, IDLER, cfg.analysis.bin_width_ps, (-half, half), exec)?;
    let fit = fit_g2(&hist, PeakShape::DoubleExponential)?;
    let t = fit.width_ps;
    let bw = 1e6 / (2.0 * PI * t);
    Ok(DecayRun {
        coherence_time_ps: t,
        coherence_time_sigma_ps: fit.width_sigma_ps,
        bandwidth_mhz: bw,
        bandwidth_sigma_mhz: bw * fit.width_sigma_ps / t,
        fit,
        seed: source.rng_seed,
        histogram: hist,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeBinPoint {
    pub phase_rad: f64,
    pub left: f64,
    pub center: f64,
    pub right: f64,
    /// Mean counts per window at `|k| >= 3`.
    pub accidental: f64,
    pub satellite_tails: f64,
    pub seed: u64,
}

/// One interferometer setting. `intrinsic_visibility` overrides the config.
pub fn timebin_point(
    cfg: &ExperimentConfig,
    phase_rad: f64,
    intrinsic_visibility: Option<f64>,
    seed: u64,
    duration_s: f64,
    exec: Execution,
) -> Result<(TimeBinPoint, Histogram)> {
    let tb = cfg
        .timebin
        .as_ref()
        .ok_or_else(|| Error::invalid("timebin", "section missing"))?;
    let mut ifm = tb.interferometer;
    ifm.phase_rad = phase_rad;
    if let Some(v) = intrinsic_visibility {
        ifm.intrinsic_visibility = v;
    }
    let source = SourceConfig {
        duration_s,
        rng_seed: seed,
        ..cfg.timebin_source()?
    };
    let stream = simulate_timebin(
        &source,
        &ifm,
        &cfg.detectors.signal,
        &cfg.detectors.idler,
        &sim_options(cfg, exec),
    )?;
    let bin = cfg.simulation.resolution_ps as u64;
    let hist = cross_correlate(&stream, SIGNAL, IDLER, bin, (-TIMEBIN_RANGE_PS, TIMEBIN_RANGE_PS), exec)?;
    let dt = ifm.delta_t_ns();
    let peaks = timebin_peaks(&hist, dt, TIMEBIN_WINDOW_FRACTION)?;
    let bg = timebin_background(&hist, dt, TIMEBIN_WINDOW_FRACTION)?;
    Ok((
        TimeBinPoint {
            phase_rad,
            left: peaks.left,
            center: peaks.center,
            right: peaks.right,
            accidental: bg.accidental,
            satellite_tails: bg.satellite_tails,
            seed,
        },
        hist,
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Slope {
    pub slope: f64,
    pub sigma: f64,
}

impl Slope {
    pub fn significance(&self) -> f64 {
        (self.slope / self.sigma).abs()
    }
}

/// Weighted straight line through `(x, counts)`; returns the slope.
pub fn count_slope(xs: &[f64], counts: &[f64]) -> Result<Slope> {
    let w: Vec<f64> = counts.iter().map(|c| 1.0 / c.max(1.0)).collect();
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &wi) in xs.iter().zip(counts).zip(&w) {
        s += wi;
        sx += wi * x;
        sy += wi * y;
        sxx += wi * x * x;
        sxy += wi * x * y;
    }
    let det = s * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::Statistics("slope needs at least two distinct x values".into()));
    }
    Ok(Slope {
        slope: (s * sxy - sx * sy) / det,
        sigma: (s / det).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeBinRun {
    pub points: Vec<TimeBinPoint>,
    /// Fit with accidentals and satellite tails removed for the net figure.
    pub fit: VisibilityFit,
    /// Net visibility with only uncorrelated accidentals removed.
    pub net_accidentals_only: f64,
    pub side_slope: Slope,
    #[serde(skip)]
    pub histogram: Histogram,
}

/// Evenly spaced phases over one two-photon fringe (`φ ∈ [0, π)`).
pub fn fringe_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * PI / n as f64).collect()
}

pub fn timebin_sweep(cfg: &ExperimentConfig, phases: &[f64], duration_s: f64, exec: Execution) -> Result<TimeBinRun> {
    let tb = cfg
        .timebin
        .as_ref()
        .ok_or_else(|| Error::invalid("timebin", "section missing"))?;
    let mut points = Vec::with_capacity(phases.len());
    let mut total: Option<Histogram> = None;
    for (i, &phi) in phases.iter().enumerate() {
        let seed = derive_seed(tb.source.rng_seed, i as u64);
        log::info!("time-bin phase {phi:.4} rad");
        let (pt, h) = timebin_point(cfg, phi, None, seed, duration_s, exec)?;
        points.push(pt);
        match total.as_mut() {
            Some(t) => t.merge(&h)?,
            None => total = Some(h),
        }
    }
    let n = points.len() as f64;
    let acc = points.iter().map(|p| p.accidental).sum::<f64>() / n;
    let tails = points.iter().map(|p| p.satellite_tails).sum::<f64>() / n;
    let centers: Vec<f64> = points.iter().map(|p| p.center).collect();
    // the two-photon phase is 2φ, so the fringe period in φ is π
    let fit = fit_visibility(phases, &centers, acc + tails.max(0.0), Period::Fixed(PI))?;
    let net_accidentals_only = fit.raw * fit.mean_level / (fit.mean_level - acc);
    let sides: Vec<f64> = points.iter().map(|p| p.left + p.right).collect();
    let side_slope = count_slope(phases, &sides)?;
    Ok(TimeBinRun {
        points,
        fit,
        net_accidentals_only,
        side_slope,
        histogram: total.expect("at least one phase"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelMap {
    pub temperature_k: f64,
    pub pump_wavelength_nm: f64,
    pub lines: Vec<CombAlignment>,
}

pub fn channel_map(cfg: &ExperimentConfig, k_range: std::ops::RangeInclusive<i32>) -> Result<ChannelMap> {
    let t = cfg.temperature();
    Ok(ChannelMap {
        temperature_k: t,
        pump_wavelength_nm: cfg.device.pump_wavelength_nm(),
        lines: match_comb_to_grid(&cfg.device, &cfg.grid, k_range, t)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceFigures {
    pub pgr_coefficient: f64,
    pub pgr_sigma: f64,
    pub bandwidth_mhz: f64,
    pub brightness: f64,
    pub brightness_sigma: f64,
    pub loss_signal_db: f64,
    pub loss_idler_db: f64,
}

/// PGR and losses from a sweep, brightness against the device linewidth.
pub fn source_figures(device: &RingDevice, analysis: &SweepAnalysis) -> Result<SourceFigures> {
    let bw = device.linewidth_mhz();
    let b = brightness(analysis.pgr_coefficient, bw)?;
    Ok(SourceFigures {
        pgr_coefficient: analysis.pgr_coefficient,
        pgr_sigma: analysis.pgr_sigma,
        bandwidth_mhz: bw,
        brightness: b,
        brightness_sigma: b * analysis.pgr_sigma / analysis.pgr_coefficient,
        loss_signal_db: analysis.transmission_signal.db,
        loss_idler_db: analysis.transmission_idler.db,
    })
}
