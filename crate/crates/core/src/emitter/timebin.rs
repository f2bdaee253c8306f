use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{laplace, origin, poisson_times, run_segments, DetectorConfig, SegmentOutput, SimOptions, SourceConfig};
use crate::device::{non_negative, positive};
use crate::error::{Error, Result};
use crate::stream::{TagStream, IDLER, SIGNAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBinConfig {
    pub clock_rate_mhz: f64,
    /// Must equal `1000 / clock_rate_mhz` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_separation_ns: Option<f64>,
    /// Pump pulse FWHM, ps.
    pub pulse_width_ps: f64,
    /// Interferometer phase per photon, rad.
    pub phase_rad: f64,
    /// Constant pump phase between consecutive pulses, rad.
    #[serde(default)]
    pub pump_phase_rad: f64,
    pub excess_loss_db: f64,
    pub splitter_loss_db: f64,
    pub intrinsic_visibility: f64,
    /// Chip-to-interferometer transmissions.
    pub transmission_signal: f64,
    pub transmission_idler: f64,
}

impl TimeBinConfig {
    /// Time-bin separation, ps.
    pub fn delta_t_ps(&self) -> f64 {
        1e6 / self.clock_rate_mhz
    }

    pub fn delta_t_ns(&self) -> f64 {
        1e3 / self.clock_rate_mhz
    }

    /// Probability that a photon reaches the analysis port of the splitter.
    pub fn port_probability(&self) -> f64 {
        10f64.powf(-self.splitter_loss_db / 10.0)
    }

    pub fn excess_transmission(&self) -> f64 {
        10f64.powf(-self.excess_loss_db / 10.0)
    }

    /// Two-photon phase seen by the central coincidence peak.
    pub fn two_photon_phase(&self) -> f64 {
        2.0 * self.phase_rad + self.pump_phase_rad
    }

    pub fn validate(&self) -> Result<()> {
        positive("timebin.clock_rate_mhz", self.clock_rate_mhz)?;
        if let Some(dt) = self.bin_separation_ns {
            if (dt * self.clock_rate_mhz / 1000.0 - 1.0).abs() > 1e-3 {
                return Err(Error::invalid(
                    "timebin.bin_separation_ns",
                    format!("{dt} ns is inconsistent with a {} MHz clock", self.clock_rate_mhz),
                ));
            }
        }
        non_negative("timebin.pulse_width_ps", self.pulse_width_ps)?;
        for (f, v) in [
            ("timebin.phase_rad", self.phase_rad),
            ("timebin.pump_phase_rad", self.pump_phase_rad),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(f, "must be finite"));
            }
        }
        non_negative("timebin.excess_loss_db", self.excess_loss_db)?;
        // the joint outcome table needs q <= 2/3
        if !(self.splitter_loss_db.is_finite() && self.port_probability() <= 2.0 / 3.0) {
            return Err(Error::invalid("timebin.splitter_loss_db", "must be at least 1.76 dB"));
        }
        if !(0.0..=1.0).contains(&self.intrinsic_visibility) {
            return Err(Error::invalid("timebin.intrinsic_visibility", "must lie in [0, 1]"));
        }
        crate::device::unit_interval("timebin.transmission_signal", self.transmission_signal)?;
        crate::device::unit_interval("timebin.transmission_idler", self.transmission_idler)
    }
}

/// Per-pair detection outcome probabilities.
#[derive(Debug, Clone, Copy)]
struct Outcomes {
    /// both detected, idler early (delay -Δt) / same bin / idler late (+Δt)
    left: f64,
    center: f64,
    right: f64,
    signal_only: f64,
    idler_only: f64,
}

impl Outcomes {
    fn new(tb: &TimeBinConfig, det_s: &DetectorConfig, det_i: &DetectorConfig) -> Self {
        let q = tb.port_probability();
        let e = tb.excess_transmission();
        let (ts, ti) = (tb.transmission_signal, tb.transmission_idler);
        let (ds, di) = (e * det_s.efficiency, e * det_i.efficiency);
        let both = ts * ti * ds * di;
        let cos = tb.two_photon_phase().cos();
        let left = both * q * q / 4.0;
        let right = left;
        let center = both * q * q * (1.0 + tb.intrinsic_visibility * cos) / 2.0;
        let joint = left + right + center;
        Outcomes {
            left,
            center,
            right,
            signal_only: ts * q * ds - joint,
            idler_only: ti * q * di - joint,
        }
    }

    fn any(&self) -> f64 {
        self.left + self.center + self.right + self.signal_only + self.idler_only
    }
}

/// Simulates the pulsed source followed by one imbalanced interferometer
/// shared by both photons.
///
/// Pairs are born in pump pulses spaced by Δt. Each photon takes the short or
/// the long arm; when both take the same arm the two indistinguishable
/// histories interfere, so the central coincidence peak carries weight
/// `½(1 + V cos(2φ + φ_pump))` against `¼` for each side peak.
pub fn simulate_timebin(
    source: &SourceConfig,
    tb: &TimeBinConfig,
    det_signal: &DetectorConfig,
    det_idler: &DetectorConfig,
    opts: &SimOptions,
) -> Result<TagStream> {
    source.validate()?;
    tb.validate()?;
    det_signal.validate("detector_signal")?;
    det_idler.validate("detector_idler")?;
    let tau = source.coherence_time()?;
    let dt = tb.delta_t_ps();
    if tau >= dt / 3.0 {
        return Err(Error::invalid(
            "source.coherence_time_ps",
            format!("{tau:.1} ps is not well below the {dt:.1} ps bin separation (need < Δt/3)"),
        ));
    }

    let out = Outcomes::new(tb, det_signal, det_idler);
    let p_any = out.any();
    let pair_rate = source.pair_rate();
    let p = source.pump_power_mw;
    let noise_gain = tb.port_probability() * tb.excess_transmission();
    let noise_s = source.linear_noise_signal * p * noise_gain + det_signal.dark_rate;
    let noise_i = source.linear_noise_idler * p * noise_gain + det_idler.dark_rate;
    opts.check_budget((2.0 * pair_rate * p_any + noise_s + noise_i) * source.duration_s)?;

    let event_rate = pair_rate * p_any * 1e-12;
    let sigma_pulse = tb.pulse_width_ps / (8.0 * 2f64.ln()).sqrt();
    let cuts = [
        out.left,
        out.left + out.center,
        out.left + out.center + out.right,
        out.left + out.center + out.right + out.signal_only,
    ];

    let (stream, _) = run_segments(
        source.duration_s,
        source.rng_seed,
        opts,
        [det_signal.dead_time_ns, det_idler.dead_time_ns],
        |t0, t1, rng| {
            let mut raw = Vec::new();
            if event_rate > 0.0 {
                let gap = Exp::new(event_rate).expect("positive rate");
                let mut t = t0;
                loop {
                    t += gap.sample(rng);
                    if t >= t1 {
                        break;
                    }
                    let slot = (t / dt).floor();
                    let g: f64 = rng.sample(StandardNormal);
                    let birth = slot * dt + sigma_pulse * g;
                    let idler_birth = birth + laplace(tau, rng);
                    let u = rng.random::<f64>() * p_any;
                    let long = |rng: &mut super::SimRng| if rng.random::<bool>() { dt } else { 0.0 };
                    let (sig, idl) = if u < cuts[0] {
                        (Some(birth + dt), Some(idler_birth))
                    } else if u < cuts[1] {
                        let arm = long(rng);
                        (Some(birth + arm), Some(idler_birth + arm))
                    } else if u < cuts[2] {
                        (Some(birth), Some(idler_birth + dt))
                    } else if u < cuts[3] {
                        (Some(birth + long(rng)), None)
                    } else {
                        (None, Some(idler_birth + long(rng)))
                    };
                    if let Some(ts) = sig {
                        raw.push((det_signal.jitter(ts, rng), SIGNAL));
                    }
                    if let Some(ti) = idl {
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
            SegmentOutput { raw, exceedances: 0 }
        },
    )?;
    Ok(stream.with_origin(origin("timebin", source.rng_seed, source.duration_s, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn config(phase: f64, v: f64) -> TimeBinConfig {
        TimeBinConfig {
            clock_rate_mhz: 750.0,
            bin_separation_ns: Some(1.3333333),
            pulse_width_ps: 50.0,
            phase_rad: phase,
            pump_phase_rad: 0.0,
            excess_loss_db: 3.0,
            splitter_loss_db: 10.0 * 2f64.log10(),
            intrinsic_visibility: v,
            transmission_signal: 0.1,
            transmission_idler: 0.1,
        }
    }

    #[test]
    fn outcome_table_is_consistent() {
        let d = DetectorConfig::ideal();
        for phase in [0.0, 0.7, std::f64::consts::FRAC_PI_2] {
            let o = Outcomes::new(&config(phase, 0.9), &d, &d);
            assert!(o.signal_only >= 0.0 && o.idler_only >= 0.0);
            // marginals do not depend on phase
            let ms = o.left + o.center + o.right + o.signal_only;
            let tb = config(phase, 0.9);
            let expect = tb.transmission_signal * tb.port_probability() * tb.excess_transmission();
            assert!((ms - expect).abs() < 1e-15);
        }
        let flat = Outcomes::new(&config(0.3, 0.0), &d, &d);
        assert!((flat.center - 2.0 * flat.left).abs() < 1e-15);
        let max = Outcomes::new(&config(0.0, 1.0), &d, &d);
        assert!((max.center - 4.0 * max.left).abs() < 1e-15);
        let min = Outcomes::new(&config(std::f64::consts::FRAC_PI_2, 1.0), &d, &d);
        assert!(min.center.abs() < 1e-15);
    }

    #[test]
    fn rejects_long_coherence_time() {
        let d = DetectorConfig::ideal();
        let s = SourceConfig {
            pump_power_mw: 1.0,
            pair_rate_coefficient: 1.0,
            linear_noise_signal: 0.0,
            linear_noise_idler: 0.0,
            schmidt_number: 1.0,
            coherence_time_ps: Some(500.0),
            duration_s: 1.0,
            rng_seed: 1,
        };
        let err = simulate_timebin(&s, &config(0.0, 1.0), &d, &d, &SimOptions::default()).unwrap_err();
        assert_eq!(err.category(), crate::error::Category::Config);
        let bad = TimeBinConfig {
            bin_separation_ns: Some(2.0),
            ..config(0.0, 1.0)
        };
        assert!(bad.validate().is_err());
    }
}
