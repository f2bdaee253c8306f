//! Closed-form source figures: CAR prediction, pair generation rate,
//! arm transmission, brightness, and power-sweep analysis.

use serde::{Deserialize, Serialize};

use crate::device::{non_negative, positive};
use crate::emitter::{dead_time_corrected_rate, joint_live_fraction, saturated_rate};
use crate::error::{Error, Result};
use crate::fit::{fit_power_law, PowerLawFit, Weighting};

/// Thermal excess of accidentals inside the coincidence window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalExcess {
    pub schmidt_number: f64,
    pub coherence_time_ps: f64,
}

impl ThermalExcess {
    /// Bunched accidentals per second inside a window of `window_ps`
    /// centred on zero delay, for pair-photon singles rates `pair_signal`
    /// and `pair_idler` (s⁻¹).
    pub fn accidentals(&self, pair_signal: f64, pair_idler: f64, window_ps: f64) -> f64 {
        if !self.schmidt_number.is_finite() {
            return 0.0;
        }
        // ∫ exp(-|τ|/τc)·(1+|τ|/τc)/2 over the window
        let tau = self.coherence_time_ps * 1e-12;
        let h = 0.5 * window_ps * 1e-12;
        let j = tau * (2.0 - (2.0 + h / tau) * (-h / tau).exp());
        pair_signal * pair_idler * j / self.schmidt_number
    }
}

/// Inputs of the CAR curve. Rates in s⁻¹, `a` in s⁻¹·mW⁻¹, `b` and the
/// coincidence coefficient in s⁻¹·mW⁻².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarModel {
    pub a_signal: f64,
    pub a_idler: f64,
    pub b_signal: f64,
    pub b_idler: f64,
    pub dark_signal: f64,
    pub dark_idler: f64,
    /// True coincidences inside the window per mW².
    pub coincidence_coefficient: f64,
    /// Share of detected pairs that land inside the window. Sets the rate of
    /// pairs that dead-time both detectors together.
    #[serde(default = "unit")]
    pub window_capture: f64,
    pub window_ps: f64,
    pub dead_time_ns: f64,
    /// When set, bunched accidentals from the pair field are added to the peak.
    #[serde(default)]
    pub thermal: Option<ThermalExcess>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarPrediction {
    pub pump_power_mw: f64,
    pub car: f64,
    /// Detected singles after dead time.
    pub singles_signal: f64,
    pub singles_idler: f64,
    /// Detected true coincidences in the window.
    pub coincidence_rate: f64,
    /// Expected accidentals in the window per second.
    pub accidental_rate: f64,
}

impl CarModel {
    pub fn validate(&self) -> Result<()> {
        for (f, v) in [
            ("a_signal", self.a_signal),
            ("a_idler", self.a_idler),
            ("b_signal", self.b_signal),
            ("b_idler", self.b_idler),
            ("dark_signal", self.dark_signal),
            ("dark_idler", self.dark_idler),
            ("coincidence_coefficient", self.coincidence_coefficient),
            ("dead_time_ns", self.dead_time_ns),
        ] {
            non_negative(f, v)?;
        }
        if self.window_ps == 0.0 {
            return Err(Error::Numeric("coincidence window is zero".into()));
        }
        positive("window_ps", self.window_ps)?;
        if !(self.window_capture > 0.0 && self.window_capture <= 1.0) {
            return Err(Error::invalid("window_capture", "must be in (0, 1]"));
        }
        if let Some(t) = self.thermal {
            positive("thermal.schmidt_number", t.schmidt_number)?;
            positive("thermal.coherence_time_ps", t.coherence_time_ps)?;
        }
        Ok(())
    }

    pub fn predict(&self, pump_power_mw: f64) -> Result<CarPrediction> {
        self.validate()?;
        non_negative("pump_power_mw", pump_power_mw)?;
        let p = pump_power_mw;
        let raw_s = self.a_signal * p + self.b_signal * p * p + self.dark_signal;
        let raw_i = self.a_idler * p + self.b_idler * p * p + self.dark_idler;
        let s_s = saturated_rate(raw_s, self.dead_time_ns);
        let s_i = saturated_rate(raw_i, self.dead_time_ns);
        let f_ind = if raw_s > 0.0 && raw_i > 0.0 {
            (s_s / raw_s) * (s_i / raw_i)
        } else {
            1.0
        };
        let pairs = (self.coincidence_coefficient * p * p / self.window_capture)
            .min(raw_s)
            .min(raw_i);
        let f = joint_live_fraction(pairs, raw_s - pairs, raw_i - pairs, self.dead_time_ns);
        let w = self.window_ps * 1e-12;
        let accidental = s_s * s_i * w;
        let true_rate = self.coincidence_coefficient * p * p * f;
        let excess = match self.thermal {
            Some(t) => t.accidentals(self.b_signal * p * p, self.b_idler * p * p, self.window_ps) * f_ind,
            None => 0.0,
        };
        let car = if accidental > 0.0 {
            1.0 + (true_rate + excess) / accidental
        } else if true_rate + excess > 0.0 {
            f64::INFINITY
        } else {
            return Err(Error::Numeric("no counts at zero pump power and zero dark rate".into()));
        };
        Ok(CarPrediction {
            pump_power_mw: p,
            car,
            singles_signal: s_s,
            singles_idler: s_i,
            coincidence_rate: true_rate,
            accidental_rate: accidental,
        })
    }
}

/// Fraction of true pairs counted by a window of `window_bins` histogram
/// bins of `resolution_ps`, when the delay is a double-sided exponential of
/// scale `tau_ps` blurred by Gaussian timing noise of `jitter_ps` (both arms
/// combined) and both timestamps are floored to the resolution.
///
/// The window sits where [`crate::engine::coincidence_summary`] puts it for a
/// symmetric peak.
pub fn window_capture(tau_ps: f64, jitter_ps: f64, resolution_ps: f64, window_bins: usize) -> Result<f64> {
    positive("tau_ps", tau_ps)?;
    non_negative("jitter_ps", jitter_ps)?;
    positive("resolution_ps", resolution_ps)?;
    if window_bins == 0 {
        return Err(Error::invalid("window_bins", "must be positive"));
    }
    let r = resolution_ps;
    let k0 = (0.5 - window_bins as f64 / 2.0).round() as i64;
    // flooring both stamps turns a true delay d into k·r with weight tri((d - k·r)/r)
    let weight = |d: f64| -> f64 {
        (k0..k0 + window_bins as i64)
            .map(|k| (1.0 - ((d - k as f64 * r) / r).abs()).max(0.0))
            .sum()
    };
    let lo = (k0 as f64 - 1.0) * r;
    let hi = (k0 + window_bins as i64) as f64 * r;
    let step = (r / 200.0).min(tau_ps / 50.0);
    let gauss: Vec<(f64, f64)> = if jitter_ps > 0.0 {
        let n = 60;
        let dg = 12.0 * jitter_ps / n as f64;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let g = -6.0 * jitter_ps + i as f64 * dg;
                (g, (-0.5 * (g / jitter_ps).powi(2)).exp())
            })
            .collect();
        let z: f64 = pts.iter().map(|p| p.1).sum();
        pts.into_iter().map(|(g, w)| (g, w / z)).collect()
    } else {
        vec![(0.0, 1.0)]
    };
    let mut total = 0.0;
    for &(g, wg) in &gauss {
        // integrate Laplace(l) · weight(l + g) over l where the weight is non-zero
        let (a, b) = (lo - g, hi - g);
        let n = ((b - a) / step).ceil() as usize;
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let l = a + i as f64 * h;
            let f = (-l.abs() / tau_ps).exp() / (2.0 * tau_ps) * weight(l + g);
            acc += if i == 0 || i == n { 0.5 * f } else { f };
        }
        total += wg * acc * h;
    }
    Ok(total)
}

pub fn predict_car(model: &CarModel, pump_power_mw: f64) -> Result<f64> {
    model.predict(pump_power_mw).map(|p| p.car)
}

/// `S_s·S_i/R_c`.
pub fn pair_generation_rate(singles_signal: f64, singles_idler: f64, coincidence_rate: f64) -> Result<f64> {
    if coincidence_rate == 0.0 {
        return Err(Error::Numeric(
            "pair generation rate undefined for zero coincidences".into(),
        ));
    }
    non_negative("singles_signal", singles_signal)?;
    non_negative("singles_idler", singles_idler)?;
    positive("coincidence_rate", coincidence_rate)?;
    Ok(singles_signal * singles_idler / coincidence_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    pub efficiency: f64,
    pub db: f64,
}

/// Heralding ratio `R_c / S_opposite` for one arm.
pub fn arm_transmission(singles_opposite: f64, coincidence_rate: f64) -> Result<Transmission> {
    if singles_opposite == 0.0 {
        return Err(Error::Numeric(
            "transmission undefined for zero opposite-arm singles".into(),
        ));
    }
    positive("singles_opposite", singles_opposite)?;
    non_negative("coincidence_rate", coincidence_rate)?;
    let efficiency = coincidence_rate / singles_opposite;
    Ok(Transmission {
        efficiency,
        db: 10.0 * efficiency.log10(),
    })
}

/// s⁻¹·MHz⁻¹·mW⁻².
pub fn brightness(pgr_coefficient: f64, bandwidth_mhz: f64) -> Result<f64> {
    if bandwidth_mhz == 0.0 {
        return Err(Error::Numeric("brightness undefined for zero bandwidth".into()));
    }
    positive("bandwidth_mhz", bandwidth_mhz)?;
    Ok(pgr_coefficient / bandwidth_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pump_power_mw: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    /// Counts in the coincidence window per second.
    pub coincidence_rate: f64,
    /// Window counts minus expected accidentals, per second.
    pub net_coincidence_rate: f64,
    pub car: f64,
    pub car_sigma: f64,
    pub acquisition_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    pub points: Vec<SweepPoint>,
    pub dead_time_ns: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAnalysis {
    /// Fits to dead-time corrected singles minus dark counts.
    pub signal: PowerLawFit,
    pub idler: PowerLawFit,
    /// `R_c = r·P²` on net, dead-time corrected coincidences.
    pub coincidence_coefficient: f64,
    pub coincidence_sigma: f64,
    pub pgr_coefficient: f64,
    pub pgr_sigma: f64,
    pub transmission_signal: Transmission,
    pub transmission_idler: Transmission,
    pub max_car: f64,
    pub max_car_power_mw: f64,
}

impl PowerSweep {
    pub fn validate(&self) -> Result<()> {
        non_negative("dead_time_ns", self.dead_time_ns)?;
        for w in self.points.windows(2) {
            if !(w[1].pump_power_mw > w[0].pump_power_mw) {
                return Err(Error::invalid("points", "pump powers must be strictly increasing"));
            }
        }
        for p in &self.points {
            for (f, v) in [
                ("pump_power_mw", p.pump_power_mw),
                ("singles_signal", p.singles_signal),
                ("singles_idler", p.singles_idler),
                ("coincidence_rate", p.coincidence_rate),
            ] {
                non_negative(f, v)?;
            }
            positive("acquisition_s", p.acquisition_s)?;
        }
        Ok(())
    }

    /// `dark` is subtracted from corrected singles before the power-law fit;
    /// coincidences are fitted on points with `P ≤ coincidence_max_power_mw`.
    pub fn analyze(&self, dark: [f64; 2], coincidence_max_power_mw: f64) -> Result<SweepAnalysis> {
        self.validate()?;
        let times: Vec<f64> = self.points.iter().map(|p| p.acquisition_s).collect();
        let powers: Vec<f64> = self.points.iter().map(|p| p.pump_power_mw).collect();
        let corrected = |r: f64| dead_time_corrected_rate(r, self.dead_time_ns);
        let fit_arm = |pick: fn(&SweepPoint) -> f64, dark: f64| {
            let rates: Vec<f64> = self
                .points
                .iter()
                .map(|p| (corrected(pick(p)) - dark).max(0.0))
                .collect();
            fit_power_law(&powers, &rates, Weighting::PoissonEach(&times))
        };
        let signal = fit_arm(|p| p.singles_signal, dark[0])?;
        let idler = fit_arm(|p| p.singles_idler, dark[1])?;

        // one-parameter weighted fit of r·P²
        let (mut num, mut den) = (0.0, 0.0);
        for p in self
            .points
            .iter()
            .filter(|p| p.pump_power_mw <= coincidence_max_power_mw)
        {
            let gain = (corrected(p.singles_signal) / p.singles_signal.max(f64::MIN_POSITIVE))
                * (corrected(p.singles_idler) / p.singles_idler.max(f64::MIN_POSITIVE));
            let t = p.acquisition_s;
            let y = p.net_coincidence_rate * gain;
            let var = (p.coincidence_rate * t).max(1.0) / (t * t) * gain * gain;
            let x = p.pump_power_mw * p.pump_power_mw;
            num += x * y / var;
            den += x * x / var;
        }
        if den == 0.0 {
            return Err(Error::Statistics(
                "no sweep points below the coincidence fit limit".into(),
            ));
        }
        let r = num / den;
        let r_sigma = den.recip().sqrt();
        if !(r > 0.0) {
            return Err(Error::Statistics("no net coincidences in the sweep".into()));
        }
        let pgr = pair_generation_rate(signal.quadratic, idler.quadratic, r)?;
        let rel = ((signal.quadratic_sigma / signal.quadratic).powi(2)
            + (idler.quadratic_sigma / idler.quadratic).powi(2)
            + (r_sigma / r).powi(2))
        .sqrt();
        let (max_car, max_car_power_mw) = self
            .points
            .iter()
            .map(|p| (p.car, p.pump_power_mw))
            .filter(|(c, _)| c.is_finite())
            .fold((f64::NAN, f64::NAN), |acc, x| {
                if acc.0.is_nan() || x.0 > acc.0 {
                    x
                } else {
                    acc
                }
            });
        Ok(SweepAnalysis {
            transmission_signal: arm_transmission(idler.quadratic, r)?,
            transmission_idler: arm_transmission(signal.quadratic, r)?,
            signal,
            idler,
            coincidence_coefficient: r,
            coincidence_sigma: r_sigma,
            pgr_coefficient: pgr,
            pgr_sigma: pgr * rel,
            max_car,
            max_car_power_mw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CarModel {
        CarModel {
            a_signal: 5e4,
            a_idler: 5e4,
            b_signal: 2.6e4,
            b_idler: 2.1e4,
            dark_signal: 40.0,
            dark_idler: 40.0,
            coincidence_coefficient: 1.0e3,
            window_capture: 1.0,
            window_ps: 729.0,
            dead_time_ns: 0.0,
            thermal: None,
        }
    }

    #[test]
    fn dark_limited_at_low_power() {
        let m = model();
        let p = 1e-6;
        let expected =
            1.0 + 1e3 * p * p / ((5e4 * p + 2.6e4 * p * p + 40.0) * (5e4 * p + 2.1e4 * p * p + 40.0) * 729e-12);
        assert!((predict_car(&m, p).unwrap() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_at_high_power() {
        let m = model();
        let cars: Vec<f64> = [2.0, 5.0, 10.0, 15.0]
            .iter()
            .map(|&p| predict_car(&m, p).unwrap())
            .collect();
        assert!(cars.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_window_is_an_error() {
        let m = CarModel {
            window_ps: 0.0,
            ..model()
        };
        assert!(predict_car(&m, 1.0).is_err());
    }

    #[test]
    fn bunched_accidentals() {
        let t = ThermalExcess {
            schmidt_number: 2.0,
            coherence_time_ps: 100.0,
        };
        // a wide window holds the whole 2τ excess
        let wide = t.accidentals(1e5, 1e5, 1e6);
        assert!((wide - 1e10 * 200e-12 / 2.0).abs() < 1e-6 * wide);
        // window of one τ: τ(2 - 2.5 e^-0.5)
        let narrow = 1e10 * 100e-12 * (2.0 - 2.5 * (-0.5f64).exp()) / 2.0;
        assert!((t.accidentals(1e5, 1e5, 100.0) - narrow).abs() < 1e-9 * narrow);
        let flat = ThermalExcess {
            schmidt_number: f64::INFINITY,
            ..t
        };
        assert_eq!(flat.accidentals(1e5, 1e5, 1e6), 0.0);
    }

    #[test]
    fn capture_limits() {
        // wide window catches everything
        let all = window_capture(100.0, 0.0, 10.0, 401).unwrap();
        assert!((all - 1.0).abs() < 1e-4, "{all}");
        // fine bins and no jitter: P(|D| < w/2) = 1 - exp(-w/2τ)
        let c = window_capture(500.0, 0.0, 1.0, 501).unwrap();
        assert!((c - (1.0 - (-250.5f64 / 500.0).exp())).abs() < 2e-3, "{c}");
        let base = window_capture(760.0, 35.0, 81.0, 9).unwrap();
        assert!((base - 0.38).abs() < 0.01, "{base}");
    }

    #[test]
    fn ratios() {
        assert_eq!(pair_generation_rate(100.0, 100.0, 100.0).unwrap(), 100.0);
        assert!(pair_generation_rate(1.0, 1.0, 0.0).is_err());
        assert!((brightness(5.2e5, 210.0).unwrap() - 2476.19).abs() < 0.01);
        assert_eq!(brightness(7.0, 1.0).unwrap(), 7.0);
        assert!(brightness(7.0, 0.0).is_err());
        let t = arm_transmission(1000.0, 50.0).unwrap();
        assert!((t.db - 10.0 * 0.05f64.log10()).abs() < 1e-12);
        assert!(arm_transmission(0.0, 1.0).is_err());
    }
}
