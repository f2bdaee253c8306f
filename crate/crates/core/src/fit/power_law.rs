//! `rate = a·P + b·P²` by weighted linear least squares.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting<'a> {
    /// Counting statistics: rates were accumulated over this many seconds.
    Poisson {
        acquisition_s: f64,
    },
    /// Counting statistics with a separate acquisition time per point.
    PoissonEach(&'a [f64]),
    Uniform,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub linear: f64,
    pub linear_sigma: f64,
    pub quadratic: f64,
    pub quadratic_sigma: f64,
    pub reduced_chi_square: f64,
    /// Coefficients pinned to zero because the unconstrained fit was negative.
    pub clipped: Vec<String>,
}

impl PowerLawFit {
    pub fn eval(&self, power_mw: f64) -> f64 {
        self.linear * power_mw + self.quadratic * power_mw * power_mw
    }
}

/// Solves for the basis functions named by `active` (0 = P, 1 = P²).
fn solve(p: &[f64], y: &[f64], w: &[f64], active: &[usize]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let basis = |k: usize, x: f64| if k == 0 { x } else { x * x };
    let n = active.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut g = nalgebra::DVector::<f64>::zeros(n);
    for ((&x, &yi), &wi) in p.iter().zip(y).zip(w) {
        for (i, &ki) in active.iter().enumerate() {
            g[i] += wi * basis(ki, x) * yi;
            for (j, &kj) in active.iter().enumerate() {
                a[(i, j)] += wi * basis(ki, x) * basis(kj, x);
            }
        }
    }
    // condition check on the scale-free correlation matrix
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)].sqrt()).collect();
    if d.contains(&0.0) {
        return Err(Error::Statistics("power sweep has no non-zero powers".into()));
    }
    if n == 2 {
        let r = a[(0, 1)] / (d[0] * d[1]);
        if 1.0 - r.abs() < 1e-10 {
            return Err(Error::Statistics(
                "power sweep is rank deficient (need at least two distinct powers)".into(),
            ));
        }
    }
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Statistics("power sweep is rank deficient".into()))?;
    let coef = &inv * &g;
    let chi2: f64 = p
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&x, &yi), &wi)| {
            let f: f64 = active.iter().enumerate().map(|(i, &k)| coef[i] * basis(k, x)).sum();
            wi * (yi - f).powi(2)
        })
        .sum();
    let var: Vec<f64> = (0..n).map(|i| inv[(i, i)]).collect();
    Ok((coef.iter().copied().collect(), var, chi2))
}

/// Fits `rates[i] = a·powers[i] + b·powers[i]²`. Negative coefficients are
/// clipped to zero and the remaining term refitted.
pub fn fit_power_law(powers_mw: &[f64], rates: &[f64], weighting: Weighting<'_>) -> Result<PowerLawFit> {
    if powers_mw.len() != rates.len() {
        return Err(Error::Numeric("powers and rates differ in length".into()));
    }
    if powers_mw.len() < 3 {
        return Err(Error::Statistics(format!(
            "power sweep needs at least 3 points, got {}",
            powers_mw.len()
        )));
    }
    if powers_mw.iter().chain(rates).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numeric(
            "powers and rates must be finite and non-negative".into(),
        ));
    }
    let times: Vec<f64> = match weighting {
        Weighting::Poisson { acquisition_s } => vec![acquisition_s; rates.len()],
        Weighting::PoissonEach(t) if t.len() == rates.len() => t.to_vec(),
        Weighting::PoissonEach(_) => return Err(Error::Numeric("one acquisition time per point required".into())),
        Weighting::Uniform => Vec::new(),
    };
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("acquisition_s", "must be positive"));
    }
    // variance of a rate from max(count, 1) counts
    let w: Vec<f64> = if times.is_empty() {
        vec![1.0; rates.len()]
    } else {
        rates
            .iter()
            .zip(&times)
            .map(|(r, t)| t * t / (r * t).max(1.0))
            .collect()
    };

    let mut active = vec![0usize, 1];
    let mut clipped = Vec::new();
    let (mut coef, mut var, mut chi2) = solve(powers_mw, rates, &w, &active)?;
    if coef[0] < 0.0 || coef[1] < 0.0 {
        // pin whichever went negative; if both, keep the quadratic term
        let drop = if coef[0] < 0.0 { 0 } else { 1 };
        clipped.push(if drop == 0 { "linear" } else { "quadratic" }.to_string());
        active.retain(|&k| k != drop);
        (coef, var, chi2) = solve(powers_mw, rates, &w, &active)?;
        if coef[0] < 0.0 {
            clipped.push(if active[0] == 0 { "linear" } else { "quadratic" }.to_string());
            coef[0] = 0.0;
            active.clear();
        }
    }
    let dof = powers_mw.len() - active.len();
    let reduced = chi2 / dof as f64;
    // without known variances the residual scatter sets the error scale
    let scale = if weighting == Weighting::Uniform { reduced } else { 1.0 };
    let mut out = [(0.0, 0.0); 2];
    for (i, &k) in active.iter().enumerate() {
        out[k] = (coef[i], (var[i] * scale).sqrt());
    }
    Ok(PowerLawFit {
        linear: out[0].0,
        linear_sigma: out[0].1,
        quadratic: out[1].0,
        quadratic_sigma: out[1].1,
        reduced_chi_square: reduced,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_recovery() {
        let p = [0.5, 1.0, 2.0, 3.0, 5.0];
        let r: Vec<f64> = p.iter().map(|x| 2.0 * x + 3.0 * x * x).collect();
        let f = fit_power_law(&p, &r, Weighting::Uniform).unwrap();
        assert!((f.linear - 2.0).abs() < 1e-9 && (f.quadratic - 3.0).abs() < 1e-9);
        assert!(f.clipped.is_empty());
    }

    #[test]
    fn pure_quadratic_clips_linear() {
        let p = [1.0, 2.0, 3.0, 4.0];
        let r = [0.9, 4.1, 8.8, 16.3];
        let f = fit_power_law(&p, &r, Weighting::Uniform).unwrap();
        assert_eq!(f.clipped, vec!["linear"]);
        assert_eq!(f.linear, 0.0);
        assert!((f.quadratic - 1.0).abs() < 0.05);
    }

    #[test]
    fn repeated_power_is_rank_deficient() {
        let e = fit_power_law(&[2.0; 4], &[1.0, 1.1, 0.9, 1.0], Weighting::Uniform).unwrap_err();
        assert!(matches!(e, Error::Statistics(_)));
    }
}
