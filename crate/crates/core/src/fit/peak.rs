//! Single peak on a flat background: `y = B + A·s((τ - τ₀)/w)`.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, Model};
use super::FitResult;
use crate::engine::Histogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PeakShape {
    /// `1/(1+u²)`, `w` is the half width at half maximum.
    Lorentzian,
    /// `exp(-|u|)`, `w` is the 1/e decay time.
    #[default]
    DoubleExponential,
}

impl PeakShape {
    fn value_and_slope(self, u: f64) -> (f64, f64) {
        match self {
            PeakShape::Lorentzian => {
                let d = 1.0 + u * u;
                (1.0 / d, -2.0 * u / (d * d))
            }
            PeakShape::DoubleExponential => {
                let e = (-u.abs()).exp();
                (e, -u.signum() * e * (u != 0.0) as u8 as f64)
            }
        }
    }

    fn width_from_hwhm(self, hwhm: f64) -> f64 {
        match self {
            PeakShape::Lorentzian => hwhm,
            PeakShape::DoubleExponential => hwhm / std::f64::consts::LN_2,
        }
    }
}

struct PeakModel(PeakShape);

impl Model for PeakModel {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (b, a, w, t0) = (p[0], p[1], p[2], p[3]);
        let u = (x - t0) / w;
        let (s, ds) = self.0.value_and_slope(u);
        g[0] = 1.0;
        g[1] = s;
        g[2] = -a * ds * u / w;
        g[3] = -a * ds / w;
        b + a * s
    }

    fn normalize(&self, p: &mut [f64]) {
        p[2] = p[2].abs();
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits a peak to `(xs, counts)` with Poisson weights. Parameters are named
/// `background`, `amplitude`, `width`, `center`.
pub fn fit_peak(xs: &[f64], counts: &[f64], shape: PeakShape) -> Result<FitResult> {
    if xs.len() != counts.len() {
        return Err(Error::Numeric("x and counts differ in length".into()));
    }
    if xs.len() < 8 {
        return Err(Error::Statistics("too few bins for a peak fit".into()));
    }
    let n = xs.len();
    let edge = (n / 5).max(1);
    let outer: Vec<f64> = counts[..edge].iter().chain(&counts[n - edge..]).copied().collect();
    let b0 = median(outer);
    let (imax, &ymax) = counts.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = b0 + 0.5 * (ymax - b0);
    let mut lo = imax;
    while lo > 0 && counts[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < n && counts[hi + 1] > half {
        hi += 1;
    }
    let spacing = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let hwhm = ((hi - lo + 1) as f64 * spacing * 0.5).max(spacing * 0.5);
    let p0 = [b0, ymax - b0, shape.width_from_hwhm(hwhm), xs[imax]];
    let weights: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1.0)).collect();
    let s = levenberg_marquardt(&PeakModel(shape), xs, counts, &weights, &p0)?;
    Ok(FitResult::from_lm(&["background", "amplitude", "width", "center"], &s))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchmidtNumber {
    pub value: f64,
    pub sigma: f64,
    /// `g2(0) ≤ 1`: no thermal excess, the mode number is unbounded.
    pub unbounded: bool,
}

impl SchmidtNumber {
    pub fn from_g2(g2: f64, sigma: f64) -> Self {
        let excess = g2 - 1.0;
        if excess <= 0.0 {
            return SchmidtNumber {
                value: f64::INFINITY,
                sigma: f64::NAN,
                unbounded: true,
            };
        }
        SchmidtNumber {
            value: 1.0 / excess,
            sigma: sigma / (excess * excess),
            unbounded: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct G2Fit {
    pub fit: FitResult,
    /// Peak over background at zero delay.
    pub g2_zero: f64,
    pub g2_sigma: f64,
    pub schmidt: SchmidtNumber,
    /// Fitted width in ps: HWHM (Lorentzian) or decay time (double exponential).
    pub width_ps: f64,
    pub width_sigma_ps: f64,
}

/// Fits the histogram and reports `g2(0)` and the implied Schmidt number.
pub fn fit_g2(hist: &Histogram, shape: PeakShape) -> Result<G2Fit> {
    let xs: Vec<f64> = (0..hist.len()).map(|j| hist.bin_center(j)).collect();
    let ys: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    if hist.counts.iter().all(|&c| c == 0) {
        return Err(Error::Statistics("empty histogram".into()));
    }
    let fit = fit_peak(&xs, &ys, shape)?;
    let (b, a) = (fit.parameters[0].value, fit.parameters[1].value);
    if !(b > 0.0) {
        return Err(Error::Statistics("no background level to normalise against".into()));
    }
    let g2 = 1.0 + a / b;
    // g = 1 + A/B
    let (vb, va, cab) = (fit.cov(0, 0), fit.cov(1, 1), fit.cov(0, 1));
    let g2_sigma = (va / (b * b) + a * a * vb / b.powi(4) - 2.0 * a * cab / b.powi(3))
        .max(0.0)
        .sqrt();
    Ok(G2Fit {
        g2_zero: g2,
        g2_sigma,
        schmidt: SchmidtNumber::from_g2(g2, g2_sigma),
        width_ps: fit.parameters[2].value,
        width_sigma_ps: fit.parameters[2].std_error,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(shape: PeakShape, b: f64, a: f64, w: f64) -> Histogram {
        let mut h = Histogram::new(20, -4000, 4000).unwrap();
        for j in 0..h.len() {
            let u = (h.bin_center(j) - 50.0) / w;
            h.counts[j] = (b + a * shape.value_and_slope(u).0).round() as u64;
        }
        h
    }

    #[test]
    fn thermal_peak() {
        let f = fit_g2(
            &synth(PeakShape::DoubleExponential, 10_000.0, 10_000.0, 400.0),
            PeakShape::DoubleExponential,
        )
        .unwrap();
        assert!((f.g2_zero - 2.0).abs() < 1e-3, "{}", f.g2_zero);
        assert!((f.width_ps - 400.0).abs() < 1.0);
        assert!((f.schmidt.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lorentzian_peak() {
        let f = fit_g2(
            &synth(PeakShape::Lorentzian, 500.0, 300.0, 250.0),
            PeakShape::Lorentzian,
        )
        .unwrap();
        assert!((f.g2_zero - 1.6).abs() < 0.01);
        assert!((f.width_ps - 250.0).abs() < 5.0);
    }

    #[test]
    fn flat_histogram_is_unbounded() {
        let mut h = Histogram::new(20, -2000, 2000).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 100);
        let f = fit_g2(&h, PeakShape::DoubleExponential).unwrap();
        assert!((f.g2_zero - 1.0).abs() < 1e-9);
        assert!(f.schmidt.unbounded);
    }
}
