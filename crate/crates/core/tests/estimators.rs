use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use ringpair::estimators::{arm_transmission, brightness, pair_generation_rate, predict_car, CarModel};
use ringpair::fit::{fit_peak, fit_power_law, fit_visibility, PeakShape, Period, Weighting};

fn powers() -> Vec<f64> {
    (1..=10).map(|i| 0.5 * i as f64).collect()
}

#[test]
fn linear_only_data() {
    let p = powers();
    let r: Vec<f64> = p.iter().map(|p| 2.5e3 * p).collect();
    let f = fit_power_law(&p, &r, Weighting::Uniform).unwrap();
    assert_relative_eq!(f.linear, 2.5e3, max_relative = 1e-9);
    assert!(f.quadratic.abs() < 1e-6);
}

#[test]
fn exact_noise_decomposition() {
    let p = powers();
    let r: Vec<f64> = p.iter().map(|p| 26e3 * p + 59e3 * p * p).collect();
    for w in [Weighting::Uniform, Weighting::Poisson { acquisition_s: 1.0 }] {
        let f = fit_power_law(&p, &r, w).unwrap();
        assert_relative_eq!(f.linear, 26e3, max_relative = 1e-9);
        assert_relative_eq!(f.quadratic, 59e3, max_relative = 1e-9);
    }
}

#[test]
fn noisy_decomposition_within_five_percent() {
    let p = powers();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 200;
    let good = (0..trials)
        .filter(|_| {
            let r: Vec<f64> = p
                .iter()
                .map(|p| Poisson::new(26e3 * p + 59e3 * p * p).unwrap().sample(&mut rng))
                .collect();
            let f = fit_power_law(&p, &r, Weighting::Poisson { acquisition_s: 1.0 }).unwrap();
            (f.linear / 26e3 - 1.0).abs() < 0.05 && (f.quadratic / 59e3 - 1.0).abs() < 0.05
        })
        .count();
    assert!(good as f64 >= 0.95 * trials as f64, "{good}/{trials}");
}

proptest! {
    #[test]
    fn power_law_scale_equivariance(a in 1e2f64..1e5, b in 1e2f64..1e5, c in 0.1f64..10.0) {
        let p = powers();
        let r: Vec<f64> = p.iter().map(|p| a * p + b * p * p).collect();
        let base = fit_power_law(&p, &r, Weighting::Uniform).unwrap();
        let rc: Vec<f64> = r.iter().map(|r| r * c).collect();
        let scaled_rates = fit_power_law(&p, &rc, Weighting::Uniform).unwrap();
        prop_assert!((scaled_rates.linear / (c * base.linear) - 1.0).abs() < 1e-7);
        prop_assert!((scaled_rates.quadratic / (c * base.quadratic) - 1.0).abs() < 1e-7);
        let pc: Vec<f64> = p.iter().map(|p| p * c).collect();
        let scaled_powers = fit_power_law(&pc, &r, Weighting::Uniform).unwrap();
        prop_assert!((scaled_powers.linear * c / base.linear - 1.0).abs() < 1e-7);
        prop_assert!((scaled_powers.quadratic * c * c / base.quadratic - 1.0).abs() < 1e-7);
    }
}

#[test]
fn car_limits() {
    let m = CarModel {
        a_signal: 5e4,
        a_idler: 5e4,
        b_signal: 2.6e4,
        b_idler: 2.2e4,
        dark_signal: 40.0,
        dark_idler: 40.0,
        coincidence_coefficient: 1.0e3,
        window_capture: 0.4,
        window_ps: 729.0,
        dead_time_ns: 100.0,
        thermal: None,
    };
    let p = 1e-7;
    let dark_limited = 1.0 + 1e3 * p * p / (40.0 * 40.0 * 729e-12);
    assert_relative_eq!(predict_car(&m, p).unwrap(), dark_limited, max_relative = 1e-3);
    let no_dark = CarModel {
        dark_signal: 0.0,
        dark_idler: 0.0,
        ..m
    };
    assert!(predict_car(&no_dark, 0.0).is_err());
}

#[test]
fn source_figures() {
    assert_relative_eq!(pair_generation_rate(100.0, 100.0, 100.0).unwrap(), 100.0);
    assert!(pair_generation_rate(1.0, 1.0, 0.0).is_err());
    let b = brightness(5.2e5, 210.0).unwrap();
    assert_relative_eq!(b, 2476.19, max_relative = 1e-5);
    assert_relative_eq!(brightness(5.2e5, 1.0).unwrap(), 5.2e5);
    assert_relative_eq!(brightness(5.2e5, 420.0).unwrap(), b / 2.0);
    let t = arm_transmission(1e4, 500.0).unwrap();
    assert_relative_eq!(t.efficiency, 0.05);
    assert_relative_eq!(t.db, -13.0103, max_relative = 1e-5);
    assert_relative_eq!(arm_transmission(10.0, 10.0).unwrap().db, 0.0);
}

#[test]
fn noiseless_lorentzian_recovered() {
    let tau = 760.0;
    let xs: Vec<f64> = (-200..200).map(|i| i as f64 * 40.0 + 20.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1000.0 + 1000.0 / (1.0 + (x / tau).powi(2))).collect();
    let f = fit_peak(&xs, &ys, PeakShape::Lorentzian).unwrap();
    let g2 = 1.0 + f.value("amplitude").unwrap() / f.value("background").unwrap();
    assert!((g2 - 2.0).abs() < 1e-6, "{g2}");
    assert!((f.value("width").unwrap() / tau - 1.0).abs() < 1e-6);
}

#[test]
fn visibility_fits() {
    let phases: Vec<f64> = (0..20).map(|i| i as f64 * std::f64::consts::PI / 20.0).collect();
    let ideal: Vec<f64> = phases.iter().map(|p| 100.0 * (1.0 + (2.0 * p).cos())).collect();
    let f = fit_visibility(&phases, &ideal, 0.0, Period::Fixed(std::f64::consts::PI)).unwrap();
    assert!((f.raw - 1.0).abs() < 1e-6 && (f.net - 1.0).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut inside = 0;
    for _ in 0..50 {
        let noisy: Vec<f64> = phases
            .iter()
            .map(|p| {
                Poisson::new(100.0 * (1.0 + 0.5 * (2.0 * p).cos()))
                    .unwrap()
                    .sample(&mut rng)
            })
            .collect();
        let f = fit_visibility(&phases, &noisy, 0.0, Period::Fixed(std::f64::consts::PI)).unwrap();
        if (f.raw - 0.5).abs() < 3.0 * f.raw_sigma {
            inside += 1;
        }
    }
    assert!(inside >= 47, "{inside}/50 within 3 sigma");
}
