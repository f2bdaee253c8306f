//! Curve fits used by the estimators.

mod lm;
mod peak;
mod power_law;
mod visibility;

pub use lm::{levenberg_marquardt, LmSolution, Model, MAX_ITERATIONS, REL_TOLERANCE};
pub use peak::{fit_g2, fit_peak, G2Fit, PeakShape, SchmidtNumber};
pub use power_law::{fit_power_law, PowerLawFit, Weighting};
pub use visibility::{fit_visibility, Period, VisibilityFit};

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub parameters: Vec<Parameter>,
    pub reduced_chi_square: f64,
    /// Row-major, same order as `parameters`. Empty if singular.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub(crate) fn from_lm(names: &[&str], s: &LmSolution) -> Self {
        let n = names.len();
        let reduced = if s.dof > 0 {
            s.chi_square / s.dof as f64
        } else {
            f64::NAN
        };
        let (errors, covariance) = match &s.covariance {
            Some(c) => (
                (0..n).map(|i| c[(i, i)].sqrt()).collect::<Vec<_>>(),
                (0..n).map(|i| (0..n).map(|j| c[(i, j)]).collect()).collect(),
            ),
            None => (vec![f64::NAN; n], Vec::new()),
        };
        FitResult {
            parameters: names
                .iter()
                .zip(&s.params)
                .zip(errors)
                .map(|((name, &value), std_error)| Parameter {
                    name: name.to_string(),
                    value,
                    std_error,
                })
                .collect(),
            reduced_chi_square: reduced,
            covariance,
            converged: s.converged,
            iterations: s.iterations,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.std_error)
    }

    pub(crate) fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .unwrap_or(f64::NAN)
    }
}
