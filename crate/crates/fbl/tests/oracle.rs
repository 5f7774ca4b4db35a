//! Closed forms checked against independent Monte Carlo.

use cfmimo_fbl::{
    epsilon_rcus_mc, epsilon_saddlepoint, gen_info_density, optimize_s, quad_decomposition, solve_saddlepoint,
    Complex64, ScalarChannelPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cn<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * (0.5 * var).sqrt()
}

fn point(g: Complex64, ghat: Complex64, sigma2: f64, rho: f64, n: usize, log_m1: f64) -> ScalarChannelPoint {
    ScalarChannelPoint::new(g, ghat, sigma2, rho, n, log_m1).unwrap()
}

#[test]
fn cgf_matches_sample_moment_generating_function() {
    let p = point(Complex64::new(0.8, 0.3), Complex64::new(0.75, 0.4), 0.6, 2.0, 1, 0.0);
    let s = 0.5 / p.sigma2;
    let dec = quad_decomposition(s, &p);
    // Finite variance of e^{-ζ i} needs 2ζ inside the domain.
    assert!(dec.domain_max > 1.8, "domain ends at {}", dec.domain_max);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 1_000_000;
    let dens: Vec<f64> = (0..draws)
        .map(|_| {
            let q = cn(&mut rng, p.rho);
            let z = cn(&mut rng, p.sigma2);
            gen_info_density(s, &p, q, p.g * q + z)
        })
        .collect();
    for zeta in [0.3, 0.9] {
        let w: Vec<f64> = dens.iter().map(|&i| (-zeta * i).exp()).collect();
        let mean = w.iter().sum::<f64>() / draws as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se_log = (var / draws as f64).sqrt() / mean;
        let kappa = dec.cgf(zeta).unwrap().kappa;
        assert!((mean.ln() - kappa).abs() < 3.0 * se_log, "ζ={zeta}: {} vs {kappa} (se {se_log})", mean.ln());
    }
}

#[test]
fn estimate_does_not_depend_on_sampling_tilt() {
    let one = Complex64::new(1.0, 0.0);
    let probe = point(one, one * 0.95, 1.0, 3.0, 100, 1.0);
    let s = 1.0;
    let dec = quad_decomposition(s, &probe);
    let n = probe.n as f64;
    // Rate roughly 2.3 standard deviations below the mean: ε around 1e-2.
    let log_m1 = n * dec.mean() - 2.3 * (n * dec.variance()).sqrt();
    let p = point(probe.g, probe.ghat, 1.0, 3.0, 100, log_m1);
    let zeta_star = solve_saddlepoint(p.rate(), &dec).unwrap();
    assert!(zeta_star > 0.05 && zeta_star < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let runs: Vec<_> = [0.0, 0.5 * zeta_star, zeta_star]
        .iter()
        .map(|&z| epsilon_rcus_mc(&p, s, 100_000, z, &mut rng).unwrap())
        .collect();
    for a in &runs {
        for b in &runs {
            let pooled = (a.stderr.unwrap().powi(2) + b.stderr.unwrap().powi(2)).sqrt();
            assert!((a.value - b.value).abs() <= 3.0 * pooled, "ζ {} vs {}: {} vs {}", a.zeta, b.zeta, a.value, b.value);
        }
    }
}

#[test]
fn twenty_db_matched_example_is_resolved_by_importance_sampling() {
    let one = Complex64::new(1.0, 0.0);
    let p = ScalarChannelPoint::with_payload_bits(one, one, 1.0, 100.0, 130, 160).unwrap();
    let s = 1.0;
    let zeta = solve_saddlepoint(p.rate(), &quad_decomposition(s, &p)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mc = epsilon_rcus_mc(&p, s, 100_000, zeta.min(1.0), &mut rng).unwrap();
    assert!(mc.log_value < 1e-9f64.ln(), "log ε = {}", mc.log_value);
    assert!(mc.rel_stderr.unwrap() < 0.1, "relative se {:?}", mc.rel_stderr);
    assert!(!mc.low_ess);
    let sp = epsilon_saddlepoint(&p, s);
    assert!((sp.log_value - mc.log_value).abs() <= 0.15f64.max(3.0 * mc.rel_stderr.unwrap()));
}

#[test]
fn saddlepoint_tracks_importance_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for &(snr_db, n, bits, mismatch) in &[
        (10.0, 100, 180u32, 0.97),
        (5.0, 300, 300, 1.0),
        (15.0, 130, 300, 0.9),
        (0.0, 300, 120, 1.05),
    ] {
        let g = Complex64::from_polar(1.0, rng.random_range(-3.0..3.0));
        let p = ScalarChannelPoint::with_payload_bits(g, g * mismatch, 1.0, 10f64.powf(snr_db / 10.0), n, bits)
            .unwrap();
        let (s, sp) = optimize_s(&p);
        let dec = quad_decomposition(s, &p);
        let safe = if dec.domain_max.is_finite() { 0.95 * dec.domain_max } else { f64::INFINITY };
        let tilt = solve_saddlepoint(p.rate(), &dec).unwrap_or(1.0).min(1.0).min(safe);
        let mc = epsilon_rcus_mc(&p, s, 40_000, tilt, &mut rng).unwrap();
        let tol = 0.15f64.max(3.0 * mc.rel_stderr.unwrap());
        assert!(
            (sp.log_value - mc.log_value).abs() <= tol,
            "{snr_db} dB n={n} b={bits}: {} vs {} (tol {tol})",
            sp.log_value,
            mc.log_value
        );
    }
}

#[test]
fn error_probability_is_monotone_in_blocklength_rate_and_payload() {
    let g = Complex64::new(0.9, -0.2);
    let ghat = Complex64::new(0.85, -0.15);
    let (sigma2, rho) = (0.5, 4.0);
    let eps = |n: usize, log_m1: f64| optimize_s(&point(g, ghat, sigma2, rho, n, log_m1)).1.log_value;
    let slack = 1e-9;

    let rate = 1.0;
    let mut prev = f64::INFINITY;
    for n in (50..=400).step_by(25) {
        let e = eps(n, rate * n as f64);
        assert!(e <= prev + slack, "n = {n}: {e} > {prev}");
        prev = e;
    }

    let mut prev = f64::NEG_INFINITY;
    for k in 1..=30 {
        let e = eps(200, 200.0 * 0.05 * k as f64);
        assert!(e >= prev - slack, "rate step {k}: {e} < {prev}");
        prev = e;
    }

    let mut prev = f64::NEG_INFINITY;
    for bits in (20..=400).step_by(20) {
        let p = ScalarChannelPoint::with_payload_bits(g, ghat, sigma2, rho, 130, bits).unwrap();
        let e = optimize_s(&p).1.log_value;
        assert!(e >= prev - slack, "b = {bits}: {e} < {prev}");
        prev = e;
    }
}
