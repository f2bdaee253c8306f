use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::thermal::{thermal_modes, ModeField};
use super::{laplace, origin, poisson_times, run_segments, DetectorConfig, SegmentOutput, SimOptions, SourceConfig};
use crate::device::ChannelPair;
use crate::error::Result;
use crate::stream::{TagStream, IDLER, SIGNAL};

/// Simulates a CW-pumped pair source seen by two detectors.
///
/// Pairs follow a Cox process whose intensity is the thermal field of
/// [`thermal_modes`]; the signal photon leaves at the emission time and the
/// idler follows after a double-sided exponential delay. Each photon then
/// survives `transmission · efficiency` independently. Linear noise and dark
/// counts are homogeneous Poisson. Jitter, quantization, and nonparalyzable
/// dead time are applied last.
pub fn simulate_cw(
    source: &SourceConfig,
    det_signal: &DetectorConfig,
    det_idler: &DetectorConfig,
    pair: &ChannelPair,
    opts: &SimOptions,
) -> Result<TagStream> {
    source.validate()?;
    det_signal.validate("detector_signal")?;
    det_idler.validate("detector_idler")?;
    let tau = source.coherence_time()?;

    let p = source.pump_power_mw;
    let ps = pair.transmission_signal * det_signal.efficiency;
    let pi = pair.transmission_idler * det_idler.efficiency;
    let p_any = 1.0 - (1.0 - ps) * (1.0 - pi);
    let pair_rate = source.pair_rate();
    let noise_s = source.linear_noise_signal * p + det_signal.dark_rate;
    let noise_i = source.linear_noise_idler * p + det_idler.dark_rate;

    let expected = (pair_rate * (ps + pi) + noise_s + noise_i) * source.duration_s;
    opts.check_budget(expected)?;

    // a sum of independent mode intensities is a superposition of
    // independent Cox processes, so each mode is thinned on its own bound
    let modes: Vec<(f64, Option<ModeField>)> = match thermal_modes(source.schmidt_number, tau) {
        Some(m) => m.into_iter().map(|(w, f)| (w, Some(f))).collect(),
        None => vec![(1.0, None)],
    };
    let p_both = ps * pi / p_any;
    let p_signal_only = ps * (1.0 - pi) / p_any;

    let (stream, exceedances) = run_segments(
        source.duration_s,
        source.rng_seed,
        opts,
        [det_signal.dead_time_ns, det_idler.dead_time_ns],
        |t0, t1, rng| {
            let mut raw = Vec::new();
            let mut exceedances = 0;
            let mut births = Vec::new();
            for (weight, field) in &modes {
                let rate = pair_rate * weight * p_any * 1e-12; // per ps
                if rate <= 0.0 {
                    continue;
                }
                births.clear();
                match field {
                    Some(f) => exceedances += f.clone().thin(rate, t0, t1, rng, &mut births),
                    None => {
                        let gap = Exp::new(rate).expect("positive rate");
                        let mut t = t0 + gap.sample(rng);
                        while t < t1 {
                            births.push(t);
                            t += gap.sample(rng);
                        }
                    }
                }
                for &t in &births {
                    let u: f64 = rng.random();
                    if u < p_both + p_signal_only {
                        raw.push((det_signal.jitter(t, rng), SIGNAL));
                    }
                    if u < p_both || u >= p_both + p_signal_only {
                        let ti = t + laplace(tau, rng);
                        raw.push((det_idler.jitter(ti, rng), IDLER));
                    }
                }
            }
            let start = raw.len();
            poisson_times(noise_s, t0, t1, SIGNAL, rng, &mut raw);
            poisson_times(noise_i, t0, t1, IDLER, rng, &mut raw);
            for r in &mut raw[start..] {
                let det = if r.1 == SIGNAL { det_signal } else { det_idler };
                r.0 = det.jitter(r.0, rng);
            }
            SegmentOutput { raw, exceedances }
        },
    )?;
    Ok(stream.with_origin(origin("cw", source.rng_seed, source.duration_s, exceedances)))
}
