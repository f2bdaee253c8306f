use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ringpair::emitter::{
    apply_dead_time, joint_live_fraction, simulate_cw, simulate_timebin, DetectorConfig, SimOptions,
};
use ringpair::engine::{autocorrelate_split, coincidence_summary, cross_correlate, timebin_peaks, SummaryOptions};
use ringpair::estimators::{arm_transmission, pair_generation_rate};
use ringpair::experiments::cw_stream;
use ringpair::io::{encode_tags, ExperimentConfig};
use ringpair::{Execution, Tag};

fn opts() -> SimOptions {
    SimOptions::default()
}

fn lossy_link(ts: f64, ti: f64) -> (ringpair::emitter::SourceConfig, ringpair::device::ChannelPair) {
    let cfg = ExperimentConfig::baseline();
    let mut pair = cfg.active_channel_pair();
    pair.transmission_signal = ts;
    pair.transmission_idler = ti;
    let source = ringpair::emitter::SourceConfig {
        pump_power_mw: 1.0,
        pair_rate_coefficient: 2e5,
        linear_noise_signal: 0.0,
        linear_noise_idler: 0.0,
        schmidt_number: f64::INFINITY,
        duration_s: 2.0,
        rng_seed: 17,
        ..cfg.source()
    };
    (source, pair)
}

/// Net coincidences in a ±8 ns window, accidentals from the far sidebands.
fn net_rate(stream: &ringpair::TagStream) -> (f64, f64) {
    let h = cross_correlate(stream, 0, 1, 81, (-405_000, 405_000), Execution::Parallel).unwrap();
    let s = coincidence_summary(
        &h,
        &SummaryOptions {
            window_ps: 81 * 199,
            guard_ps: 200_000,
        },
    )
    .unwrap();
    let t = stream.acquisition_s();
    (s.net_coincidence_rate, (s.peak_counts as f64).sqrt() / t)
}

#[test]
fn pgr_recovers_generated_rate() {
    let (source, pair) = lossy_link(0.3, 0.2);
    let ideal = DetectorConfig::ideal();
    let s = simulate_cw(&source, &ideal, &ideal, &pair, &opts()).unwrap();
    let t = s.acquisition_s();
    let (rc, rc_sigma) = net_rate(&s);
    let (ss, si) = (s.count(0) as f64 / t, s.count(1) as f64 / t);
    let pgr = pair_generation_rate(ss, si, rc).unwrap();
    // dominated by the coincidence count
    let sigma = pgr * (rc_sigma / rc);
    assert!((pgr - 2e5).abs() < 3.0 * sigma, "pgr {pgr} ± {sigma}");
}

#[test]
fn transmission_of_lossless_and_lossy_arms() {
    let ideal = DetectorConfig::ideal();
    let (mut source, pair) = lossy_link(1.0, 1.0);
    source.duration_s = 0.05;
    let s = simulate_cw(&source, &ideal, &ideal, &pair, &opts()).unwrap();
    let (rc, _) = net_rate(&s);
    let t = arm_transmission(s.count(1) as f64 / s.acquisition_s(), rc).unwrap();
    assert!(t.db.abs() < 0.05, "{}", t.db);

    let (source, pair) = lossy_link(0.05, 1.0);
    let s = simulate_cw(&source, &ideal, &ideal, &pair, &opts()).unwrap();
    let (rc, _) = net_rate(&s);
    let t = arm_transmission(s.count(1) as f64 / s.acquisition_s(), rc).unwrap();
    assert!((t.db + 13.01).abs() < 0.2, "{}", t.db);
}

#[test]
fn cross_correlation_peak_width() {
    let cfg = ExperimentConfig::baseline();
    let tau = cfg.device.coherence_time_ps();
    let (mut source, pair) = lossy_link(1.0, 1.0);
    source.pair_rate_coefficient = 1e6;
    source.duration_s = 0.1;
    let ideal = DetectorConfig::ideal();
    let s = simulate_cw(&source, &ideal, &ideal, &pair, &opts()).unwrap();
    let h = cross_correlate(&s, 0, 1, 81, (-8100, 8100), Execution::Parallel).unwrap();
    let max = *h.counts.iter().max().unwrap() as f64;
    // crossing points by linear interpolation on each flank
    let above: Vec<usize> = (0..h.len()).filter(|&j| h.counts[j] as f64 >= max / 2.0).collect();
    let (l, r) = (above[0], above[above.len() - 1]);
    let cross = |inside: usize, outside: usize| {
        let (ci, co) = (h.counts[inside] as f64, h.counts[outside] as f64);
        h.bin_center(outside) + (h.bin_center(inside) - h.bin_center(outside)) * (max / 2.0 - co) / (ci - co)
    };
    let fwhm = cross(r, r + 1) - cross(l, l - 1);
    let expected = 2.0 * tau * std::f64::consts::LN_2;
    assert!((fwhm / expected - 1.0).abs() < 0.10, "fwhm {fwhm} vs {expected}");
}

#[test]
fn poisson_noise_autocorrelation_is_flat() {
    let (mut source, pair) = lossy_link(1.0, 1.0);
    source.pair_rate_coefficient = 0.0;
    source.linear_noise_signal = 2e6;
    source.duration_s = 0.5;
    let ideal = DetectorConfig::ideal();
    let s = simulate_cw(&source, &ideal, &ideal, &pair, &opts()).unwrap();
    let h = autocorrelate_split(&s, 0, 3, 810, (-81_000, 81_000), Execution::Parallel).unwrap();
    let mid = h.len() / 2;
    let zero = h.counts[mid] as f64;
    let far: Vec<f64> = h
        .counts
        .iter()
        .enumerate()
        .filter(|(j, _)| j.abs_diff(mid) > 20)
        .map(|(_, &c)| c as f64)
        .collect();
    let bg = far.iter().sum::<f64>() / far.len() as f64;
    let ratio = zero / bg;
    assert!((ratio - 1.0).abs() < 3.0 * zero.sqrt() / bg, "ratio {ratio}");
}

#[test]
fn cw_runs_are_deterministic() {
    let mut cfg = ExperimentConfig::baseline();
    cfg.source.duration_s = 0.05;
    cfg.source.pump_power_mw = 4.0;
    let bytes = |cfg: &ExperimentConfig, exec| {
        let mut b = Vec::new();
        encode_tags(&cw_stream(cfg, exec).unwrap(), &mut b).unwrap();
        b
    };
    let first = bytes(&cfg, Execution::Parallel);
    assert_eq!(first, bytes(&cfg, Execution::Parallel));
    assert_eq!(first, bytes(&cfg, Execution::Sequential));
    cfg.source.rng_seed += 1;
    assert_ne!(first, bytes(&cfg, Execution::Parallel));
}

fn timebin_setup(v: f64, phase: f64, noiseless: bool) -> (f64, f64, f64) {
    let cfg = ExperimentConfig::baseline();
    let tb = cfg.timebin.unwrap();
    let mut source = cfg.timebin_source().unwrap();
    source.duration_s = 20.0;
    source.rng_seed = 5 + (phase * 1000.0) as u64;
    if noiseless {
        source.linear_noise_signal = 0.0;
        source.linear_noise_idler = 0.0;
    }
    let mut ifm = tb.interferometer;
    ifm.intrinsic_visibility = v;
    ifm.phase_rad = phase;
    let det = DetectorConfig {
        dark_rate: if noiseless { 0.0 } else { 40.0 },
        ..DetectorConfig::ideal()
    };
    let s = simulate_timebin(&source, &ifm, &det, &det, &opts()).unwrap();
    let h = cross_correlate(&s, 0, 1, 81, (-8100, 8100), Execution::Parallel).unwrap();
    let p = timebin_peaks(&h, ifm.delta_t_ns(), 0.25).unwrap();
    (p.left, p.center, p.right)
}

#[test]
fn timebin_without_coherence_is_flat() {
    let centers: Vec<f64> = [0.0, 0.4, 0.8, 1.2]
        .iter()
        .map(|&phi| timebin_setup(0.0, phi, false).1)
        .collect();
    let mean = centers.iter().sum::<f64>() / centers.len() as f64;
    let chi2: f64 = centers.iter().map(|c| (c - mean).powi(2) / mean).sum();
    // 3 degrees of freedom; 16.3 is the 0.999 quantile
    assert!(chi2 < 16.3, "chi2 {chi2} for {centers:?}");
}

#[test]
fn timebin_minimum_empties_center_only() {
    let cfg = ExperimentConfig::baseline();
    let pump = cfg.timebin.unwrap().interferometer.pump_phase_rad;
    // central rate ∝ 1 + cos(2φ + φ_p): minimum at 2φ + φ_p = π
    let phi_min = (std::f64::consts::PI - pump) / 2.0;
    let (l0, c0, r0) = timebin_setup(1.0, phi_min, true);
    let (l1, c1, r1) = timebin_setup(1.0, phi_min + std::f64::consts::FRAC_PI_2, true);
    assert!(c1 > 1000.0, "{c1}");
    // residual centre counts are satellite tails and multi-pair events only
    assert!(c0 < 0.01 * c1, "min {c0} max {c1}");
    let (s0, s1) = (l0 + r0, l1 + r1);
    assert!((s0 - s1).abs() < 3.0 * (s0 + s1).sqrt(), "sides {s0} vs {s1}");
    // four to one between the constructive centre and one side peak
    let ratio = 2.0 * c1 / s1;
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}

#[test]
fn joint_dead_time_matches_direct_thinning() {
    let (g, na, nb, tau_ns) = (4e5, 2.0e6, 1.5e6, 120.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t_end = 0.2_f64;
    let mut tags = Vec::new();
    let mut pair_times = Vec::new();
    let mut push_poisson = |rate: f64, ch: Option<u8>, rng: &mut ChaCha8Rng| {
        let mut t = 0.0;
        loop {
            t += -(1.0 - rng.random::<f64>()).ln() / rate;
            if t >= t_end {
                break;
            }
            let ps = (t * 1e12) as u64;
            match ch {
                Some(c) => tags.push(Tag::new(ps, c)),
                None => {
                    tags.push(Tag::new(ps, 0));
                    tags.push(Tag::new(ps, 1));
                    pair_times.push(ps);
                }
            }
        }
    };
    push_poisson(g, None, &mut rng);
    push_poisson(na, Some(0), &mut rng);
    push_poisson(nb, Some(1), &mut rng);
    tags.sort_by_key(|t| (t.time, t.channel));
    let kept = apply_dead_time(tags, &[(tau_ns * 1e3) as u64; 2]);
    let mut both = std::collections::HashMap::new();
    for t in &kept {
        *both.entry(t.time).or_insert(0u8) |= 1 << t.channel;
    }
    let survived = pair_times.iter().filter(|t| both.get(t) == Some(&3)).count() as f64;
    let measured = survived / pair_times.len() as f64;
    let predicted = joint_live_fraction(g, na, nb, tau_ns);
    let sigma = (measured * (1.0 - measured) / pair_times.len() as f64).sqrt();
    assert!(
        (measured - predicted).abs() < 4.0 * sigma + 2e-3,
        "measured {measured} predicted {predicted}"
    );
}
