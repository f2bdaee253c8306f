//! Multimode thermal intensity used to modulate pair emission.
//!
//! The intensity is `I(t) = Σ λ_k |z_k(t)|²` where each `z_k` is a unit-power
//! complex Ornstein-Uhlenbeck field. With `Σ λ_k = 1` the mean is one and
//! `g²(0) = 1 + Σ λ_k²`, so choosing weights with `Σ λ_k² = 1/K` gives the
//! statistics of a source with Schmidt number `K`.
//!
//! Only `|z|²` of each mode is tracked. The OU increment is isotropic, so over
//! a step with power memory `r = e^(-Δt/τ)` the new power is
//! `(1 - r)·Gamma(1 + N, 1)` with `N ~ Poisson(r·|z|²/(1 - r))`: the
//! noncentral chi-square on two degrees of freedom as a Poisson mixture.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};

/// Tail probability allowed for the thinning bound.
const BOUND_TAIL: f64 = 1e-10;

/// Power `|z|²` of one unit-mean field mode.
#[derive(Debug, Clone)]
pub struct ModeField {
    /// Inverse intensity correlation time, 1/ps.
    inv_corr: f64,
    power: f64,
    last: f64,
}

impl ModeField {
    pub fn new(corr_time_ps: f64) -> Self {
        ModeField {
            inv_corr: 1.0 / corr_time_ps,
            power: 0.0,
            last: f64::NEG_INFINITY,
        }
    }

    /// Dominating intensity used for thinning: `P(|z|² > bound) = 1e-10`.
    pub fn bound() -> f64 {
        -BOUND_TAIL.ln()
    }

    /// Forget the field state; the next sample is drawn from the stationary law.
    pub fn reset(&mut self) {
        self.last = f64::NEG_INFINITY;
    }

    /// Advances the mode to time `t` (ps, nondecreasing) and returns `|z(t)|²`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> f64 {
        let r = (-(t - self.last) * self.inv_corr).exp();
        self.last = t;
        let fresh = 1.0 - r;
        let mean = r * self.power / fresh;
        let e: f64 = rng.sample(Exp1);
        let u: f64 = rng.random();
        // 1 - m <= e^-m, so N = 0 is settled here for almost every step
        self.power = if u < 1.0 - mean {
            fresh * e
        } else {
            self.mixed(mean, fresh, u, e, rng)
        };
        self.power
    }

    /// The `N > 0` branch of [`sample`](Self::sample), continuing the
    /// inversion of `N ~ Poisson(mean)` from the same uniform.
    #[inline(never)]
    fn mixed<R: Rng + ?Sized>(&self, mean: f64, fresh: f64, u: f64, e: f64, rng: &mut R) -> f64 {
        if !(fresh > 0.0) {
            // no time has passed
            return self.power;
        }
        let n = if mean >= 30.0 {
            Poisson::new(mean).expect("finite mean").sample(rng) as u64
        } else {
            let (mut k, mut p) = (0u64, (-mean).exp());
            let mut cdf = p;
            while u >= cdf && p > 0.0 {
                k += 1;
                p *= mean / k as f64;
                cdf += p;
            }
            k
        };
        let g = match n {
            0 => 0.0,
            1..=16 => (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum(),
            _ => Gamma::new(n as f64, 1.0).expect("positive shape").sample(rng),
        };
        fresh * (e + g)
    }

    /// Emission times on `[t0, t1)` (ps) of a Cox process with intensity
    /// `rate·|z(t)|²` (rate per ps), by thinning at `rate·bound`. Returns the
    /// number of candidates whose power exceeded the bound.
    pub fn thin<R: Rng + ?Sized>(&mut self, rate: f64, t0: f64, t1: f64, rng: &mut R, out: &mut Vec<f64>) -> u64 {
        let bound = Self::bound();
        let step = 1.0 / (rate * bound);
        let mut exceedances = 0;
        let mut t = t0;
        loop {
            t += step * rng.sample::<f64, _>(Exp1);
            if t >= t1 {
                return exceedances;
            }
            let p = self.sample(t, rng);
            exceedances += (p > bound) as u64;
            if rng.random::<f64>() * bound < p {
                out.push(t);
            }
        }
    }
}

/// Weighted modes for Schmidt number `K`; `None` for `K = inf` (no bunching).
pub fn thermal_modes(schmidt_number: f64, corr_time_ps: f64) -> Option<Vec<(f64, ModeField)>> {
    let weights = mode_weights(schmidt_number)?;
    Some(weights.into_iter().map(|w| (w, ModeField::new(corr_time_ps))).collect())
}

/// Mode weights with unit sum and `Σ λ² = 1/K`: one dominant mode and
/// `ceil(K) - 1` equal minor modes.
pub fn mode_weights(schmidt_number: f64) -> Option<Vec<f64>> {
    if !schmidt_number.is_finite() {
        return None;
    }
    assert!(schmidt_number >= 1.0, "Schmidt number below one");
    let m = schmidt_number.ceil().max(1.0) as usize;
    if m == 1 {
        return Some(vec![1.0]);
    }
    let mf = m as f64;
    let disc = (1.0 - mf + mf * (mf - 1.0) / schmidt_number).max(0.0);
    let x = (1.0 + disc.sqrt()) / mf;
    let rest = (1.0 - x) / (mf - 1.0);
    let mut w = vec![rest; m];
    w[0] = x;
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_match_schmidt_number() {
        for k in [1.0, 1.16, 2.0, 2.5, 5.0] {
            let w = mode_weights(k).unwrap();
            let s: f64 = w.iter().sum();
            let s2: f64 = w.iter().map(|x| x * x).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!((1.0 / s2 - k).abs() < 1e-9, "K={k} got {}", 1.0 / s2);
        }
        assert!(mode_weights(f64::INFINITY).is_none());
    }

    #[test]
    fn bound_tail() {
        assert!(((-ModeField::bound()).exp() - 1e-10).abs() < 1e-20);
    }

    #[test]
    fn stationary_moments() {
        let mut f = ModeField::new(100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let x = f.sample(i as f64 * 5000.0, &mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let g2 = s2 / n as f64 / (mean * mean);
        assert!((mean - 1.0).abs() < 0.01);
        assert!((g2 - 2.0).abs() < 0.03);
    }

    #[test]
    fn power_correlation_decays_with_corr_time() {
        // pairs of samples one correlation time apart, pairs far from each other
        let tau = 100.0;
        let mut f = ModeField::new(tau);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 400_000;
        let mut s = 0.0;
        for i in 0..n {
            let t = i as f64 * 1e5;
            s += f.sample(t, &mut rng) * f.sample(t + tau, &mut rng);
        }
        let g2 = s / n as f64;
        assert!((g2 - (1.0 + (-1f64).exp())).abs() < 0.02, "{g2}");
        // short steps keep the power
        f.reset();
        let p0 = f.sample(0.0, &mut rng);
        let p1 = f.sample(1e-9, &mut rng);
        assert!((p1 - p0).abs() < 1e-3 * (1.0 + p0));
    }

    #[test]
    fn conditional_mean_follows_memory() {
        // E[|z(t+Δ)|² | |z(t)|² = p] = r p + 1 - r with r = e^(-Δ/τ)
        let tau = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = ModeField::new(tau);
        let mut p0 = 0.0;
        while p0 < 2.0 {
            f.reset();
            p0 = f.sample(0.0, &mut rng);
        }
        for r in [0.5, 0.99] {
            let dt = -tau * f64::ln(r);
            let n = 200_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = f.clone().sample(dt, &mut rng);
                s1 += x;
                s2 += x * x;
            }
            let mean = s1 / n as f64;
            let sd = (s2 / n as f64 - mean * mean).sqrt() / (n as f64).sqrt();
            let expect = r * p0 + 1.0 - r;
            assert!((mean - expect).abs() < 4.0 * sd, "r={r}: {mean} vs {expect}");
        }
    }
}
