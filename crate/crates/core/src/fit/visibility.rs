//! Fringe fit `C(φ) = C₀·(1 + V·cos(k·φ + φ₀))`.

use std::f64::consts::PI;

use serde::Serialize;

use super::lm::{levenberg_marquardt, Model};
use super::FitResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    /// Fringe period in the units of the phase axis.
    Fixed(f64),
    Free,
}

struct Fringe {
    /// `Some(k)` when the period is held fixed.
    k: Option<f64>,
}

impl Model for Fringe {
    fn n_params(&self) -> usize {
        if self.k.is_some() {
            3
        } else {
            4
        }
    }

    fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let k = self.k.unwrap_or_else(|| p[3]);
        let (c0, v, x0) = (p[0], p[1], p[2]);
        let arg = k * x + x0;
        let (s, c) = arg.sin_cos();
        g[0] = 1.0 + v * c;
        g[1] = c0 * c;
        g[2] = -c0 * v * s;
        if self.k.is_none() {
            g[3] = -c0 * v * s * x;
        }
        c0 * (1.0 + v * c)
    }
}

fn wrap(phase: f64) -> f64 {
    let r = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Linear least squares on `[1, cos kx, sin kx]`; returns `(c0, v, x0, rss)`.
fn linear_guess(xs: &[f64], ys: &[f64], k: f64) -> Option<(f64, f64, f64, f64)> {
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let row = nalgebra::Vector3::new(1.0, (k * x).cos(), (k * x).sin());
        a += row * row.transpose();
        b += row * y;
    }
    let c = a.try_inverse()? * b;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - c[0] - c[1] * (k * x).cos() - c[2] * (k * x).sin()).powi(2))
        .sum();
    // c1 cos + c2 sin = R cos(kx + x0) with R cos x0 = c1, R sin x0 = -c2
    let r = c[1].hypot(c[2]);
    Some((c[0], r / c[0], (-c[2]).atan2(c[1]), rss))
}

#[derive(Debug, Clone, Serialize)]
pub struct VisibilityFit {
    pub fit: FitResult,
    pub raw: f64,
    pub raw_sigma: f64,
    /// Accidental-subtracted visibility.
    pub net: f64,
    pub net_sigma: f64,
    pub accidental_level: f64,
    pub mean_level: f64,
    pub phase_offset: f64,
    pub period: f64,
}

/// Fits coincidence counts against phase with Poisson weights. `accidental_level`
/// is the background (in the same units as `counts`) removed for the net figure.
pub fn fit_visibility(phases: &[f64], counts: &[f64], accidental_level: f64, period: Period) -> Result<VisibilityFit> {
    if phases.len() != counts.len() {
        return Err(Error::Numeric("phases and counts differ in length".into()));
    }
    if phases.len() < 5 {
        return Err(Error::Statistics(format!(
            "visibility fit needs at least 5 points, got {}",
            phases.len()
        )));
    }
    if !(accidental_level >= 0.0) {
        return Err(Error::invalid("accidental_level", "must be non-negative"));
    }
    let mut distinct = phases.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let span = distinct[distinct.len() - 1] - distinct[0];

    let (k_fixed, k0) = match period {
        Period::Fixed(p) => {
            if !(p > 0.0) {
                return Err(Error::invalid("period", "must be positive"));
            }
            if distinct.len() < 3 || span < 0.5 * p {
                return Err(Error::Statistics(
                    "phases do not cover enough of a fringe to identify it".into(),
                ));
            }
            (Some(2.0 * PI / p), 2.0 * PI / p)
        }
        Period::Free => {
            if distinct.len() < 5 || span <= 0.0 {
                return Err(Error::Statistics(
                    "phases are clustered; the fringe period is not identifiable".into(),
                ));
            }
            // scan from half a fringe over the span up to the sampling limit
            let min_gap = distinct.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let (k_lo, k_hi) = (PI / span, PI / min_gap);
            let best = (0..=2000)
                .map(|i| k_lo * (k_hi / k_lo).powf(i as f64 / 2000.0))
                .filter_map(|k| linear_guess(phases, counts, k).map(|g| (k, g.3)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::Statistics("fringe period is not identifiable".into()))?;
            (None, best.0)
        }
    };
    let (c0, v, x0, _) = linear_guess(phases, counts, k0)
        .ok_or_else(|| Error::Statistics("phases are clustered; the fringe is not identifiable".into()))?;
    if !(c0 > 0.0) {
        return Err(Error::Statistics("no counts to fit".into()));
    }
    let mut p0 = vec![c0, v.min(1.0), x0];
    if k_fixed.is_none() {
        p0.push(k0);
    }
    let weights: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1.0)).collect();
    let model = Fringe { k: k_fixed };
    let mut sol = levenberg_marquardt(&model, phases, counts, &weights, &p0)?;
    if sol.params[1] < 0.0 {
        sol.params[1] = -sol.params[1];
        sol.params[2] += PI;
        if let Some(c) = sol.covariance.as_mut() {
            // V changed sign: flip its correlations
            for j in 0..c.ncols() {
                if j != 1 {
                    c[(1, j)] = -c[(1, j)];
                    c[(j, 1)] = -c[(j, 1)];
                }
            }
        }
    }
    sol.params[2] = wrap(sol.params[2]);
    let names: &[&str] = if k_fixed.is_some() {
        &["mean", "visibility", "phase_offset"]
    } else {
        &["mean", "visibility", "phase_offset", "wavenumber"]
    };
    let fit = FitResult::from_lm(names, &sol);
    let (c0, v) = (fit.parameters[0].value, fit.parameters[1].value);
    let raw_sigma = fit.parameters[1].std_error;
    let denom = c0 - accidental_level;
    if !(denom > 0.0) {
        return Err(Error::Statistics(
            "accidental level exceeds the mean coincidence level".into(),
        ));
    }
    // V_net = V·C₀/(C₀ - A)
    let net = v * c0 / denom;
    let d_v = c0 / denom;
    let d_c0 = -v * accidental_level / (denom * denom);
    let net_var = d_v * d_v * fit.cov(1, 1) + d_c0 * d_c0 * fit.cov(0, 0) + 2.0 * d_v * d_c0 * fit.cov(0, 1);
    let k = k_fixed.unwrap_or_else(|| fit.parameters[3].value);
    Ok(VisibilityFit {
        raw: v,
        raw_sigma,
        net,
        net_sigma: net_var.max(0.0).sqrt(),
        accidental_level,
        mean_level: c0,
        phase_offset: fit.parameters[2].value,
        period: 2.0 * PI / k,
        fit,
    })
}
