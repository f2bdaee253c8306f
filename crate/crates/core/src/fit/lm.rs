//! Damped Gauss-Newton (Levenberg-Marquardt) for small weighted
//! least-squares problems with analytic gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOLERANCE: f64 = 1e-9;

/// A scalar model `y = f(x; p)`.
pub trait Model {
    fn n_params(&self) -> usize;
    /// Writes `∂f/∂p` into `grad` and returns `f`.
    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64;
    /// Maps parameters back into their canonical domain after a step.
    fn normalize(&self, _p: &mut [f64]) {}
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// `(JᵀWJ)⁻¹`; `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    pub chi_square: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn chi_square<M: Model>(m: &M, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64], grad: &mut [f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(w)
        .map(|((&x, &y), &wi)| {
            let r = y - m.eval(x, p, grad);
            wi * r * r
        })
        .sum()
}

/// Normal matrix `JᵀWJ` and gradient `JᵀW r`.
fn normal_equations<M: Model>(m: &M, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.n_params();
    let mut a = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    let mut grad = vec![0.0; n];
    for ((&x, &y), &wi) in xs.iter().zip(ys).zip(w) {
        let f = m.eval(x, p, &mut grad);
        let r = y - f;
        for i in 0..n {
            g[i] += wi * grad[i] * r;
            for j in 0..=i {
                a[(i, j)] += wi * grad[i] * grad[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    (a, g)
}

pub fn levenberg_marquardt<M: Model>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    p0: &[f64],
) -> Result<LmSolution> {
    let n = model.n_params();
    if xs.len() != ys.len() || xs.len() != weights.len() || p0.len() != n {
        return Err(Error::Numeric("mismatched fit inputs".into()));
    }
    if xs.len() < n {
        return Err(Error::Statistics(format!(
            "{} points cannot determine {n} parameters",
            xs.len()
        )));
    }
    let mut p = p0.to_vec();
    let mut scratch = vec![0.0; n];
    let mut chi2 = chi_square(model, xs, ys, weights, &p, &mut scratch);
    if !chi2.is_finite() {
        return Err(Error::Numeric("non-finite residuals at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (a, g) = normal_equations(model, xs, ys, weights, &p);
        if g.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }
        let mut stepped = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            model.normalize(&mut trial);
            let c2 = chi_square(model, xs, ys, weights, &trial, &mut scratch);
            if c2.is_finite() && c2 <= chi2 {
                let small = delta
                    .iter()
                    .zip(&p)
                    .all(|(d, v)| d.abs() <= REL_TOLERANCE * (v.abs() + REL_TOLERANCE));
                p = trial;
                chi2 = c2;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !stepped {
            // no downhill step at any damping: at a minimum to working precision
            converged = true;
            break;
        }
    }
    let (a, _) = normal_equations(model, xs, ys, weights, &p);
    let covariance = a
        .try_inverse()
        .filter(|c| (0..n).all(|i| c[(i, i)].is_finite() && c[(i, i)] >= 0.0));
    Ok(LmSolution {
        params: p,
        covariance,
        chi_square: chi2,
        dof: xs.len().saturating_sub(n),
        iterations,
        converged,
    })
}
