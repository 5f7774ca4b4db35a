//! Identities the quadratic-form machinery must satisfy to rounding.

use cfmimo_fbl::{
    epsilon_saddlepoint, gen_info_density, optimize_s, quad_decomposition, Complex64, ScalarChannelPoint,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cn<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * (0.5 * var).sqrt()
}

fn random_point<R: Rng>(rng: &mut R) -> (f64, ScalarChannelPoint) {
    let g = cn(rng, 1.0);
    let err_var = rng.random_range(0.0..0.5);
    let ghat = g + cn(rng, err_var);
    let sigma2 = 10f64.powf(rng.random_range(-2.0..1.0));
    let rho = 10f64.powf(rng.random_range(-1.0..2.0));
    let p = ScalarChannelPoint::with_payload_bits(g, ghat, sigma2, rho, 130, 160).unwrap();
    (rng.random_range(0.05..4.0) / sigma2, p)
}

#[test]
fn quadratic_form_reproduces_direct_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (s, p) = random_point(&mut rng);
        let dec = quad_decomposition(s, &p);
        let q = cn(&mut rng, p.rho);
        let z = cn(&mut rng, p.sigma2);
        let direct = gen_info_density(s, &p, q, p.g * q + z);
        let form = dec.density(q, z);
        worst = worst.max((direct - form).abs() / direct.abs().max(1.0));
    }
    assert!(worst < 1e-12, "max relative deviation {worst:e}");
}

#[test]
fn cgf_vanishes_at_zero_and_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (s, p) = random_point(&mut rng);
        let dec = quad_decomposition(s, &p);
        assert_eq!(dec.cgf(0.0).unwrap().kappa, 0.0);
        let top = if dec.domain_max.is_finite() { dec.domain_max } else { 50.0 };
        for k in 0..1000 {
            let zeta = top * k as f64 / 1000.0;
            let c = dec.cgf(zeta).unwrap();
            assert!(c.kappa2 > 0.0, "κ'' = {} at ζ = {zeta}", c.kappa2);
        }
    }
}

#[test]
fn matched_mean_density_is_log_one_plus_snr() {
    for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let rho = 10f64.powf(snr_db / 10.0);
        let g = Complex64::from_polar(0.7, 1.1);
        let sigma2 = 0.3;
        let p = ScalarChannelPoint::new(g, g, sigma2, rho, 100, 1.0).unwrap();
        let dec = quad_decomposition(1.0 / sigma2, &p);
        let expected = (g.norm_sqr() * rho / sigma2).ln_1p();
        assert!((dec.mean() - expected).abs() < 1e-12 * expected.max(1.0), "{snr_db} dB");
    }
}

#[test]
fn matched_optimal_s_sits_in_the_refinement_bracket() {
    // With the tilt capped at one the optimum behaves like s = 1/((1 + ζ)σ²),
    // so it lands in [1/2, 1]/σ² rather than at 1/σ² itself.
    for snr_db in [5.0, 10.0, 20.0, 30.0] {
        for (n, bits) in [(130, 160), (100, 100), (300, 300), (130, 60)] {
            let rho = 10f64.powf(snr_db / 10.0);
            let one = Complex64::new(1.0, 0.0);
            let p = ScalarChannelPoint::with_payload_bits(one, one, 1.0, rho, n, bits).unwrap();
            let (s, est) = optimize_s(&p);
            if est.value > 0.1 {
                continue;
            }
            assert!((0.5 - 1e-9..=2.0).contains(&s), "{snr_db} dB, n={n}, b={bits}: s·σ² = {s}");
            let heuristic = 1.0 / (1.0 + est.zeta.min(1.0));
            assert!((s / heuristic - 1.0).abs() < 0.05, "s·σ² = {s} vs {heuristic}");
        }
    }
}

#[test]
fn optimal_s_scales_inversely_with_channel_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let (_, p) = random_point(&mut rng);
        let c = cn(&mut rng, 1.0) * 10f64.powf(rng.random_range(-4.0..4.0));
        let (s1, e1) = optimize_s(&p);
        let (s2, e2) = optimize_s(&p.scaled(c));
        assert!((s1 / (s2 * c.norm_sqr()) - 1.0).abs() < 1e-6);
        assert!((e1.log_value - e2.log_value).abs() <= 1e-9 * e1.log_value.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bound_is_invariant_under_joint_scaling(
        g_re in -2.0..2.0f64, g_im in -2.0..2.0f64,
        e_re in -0.3..0.3f64, e_im in -0.3..0.3f64,
        log_sigma2 in -3.0..1.0f64, log_rho in -1.0..2.0f64,
        s_rel in 0.1..4.0f64,
        c_mag in -6.0..6.0f64, c_arg in -3.1..3.1f64,
    ) {
        let g = Complex64::new(g_re, g_im);
        prop_assume!(g.norm() > 1e-3);
        let sigma2 = 10f64.powf(log_sigma2);
        let p = ScalarChannelPoint::with_payload_bits(
            g, g + Complex64::new(e_re, e_im), sigma2, 10f64.powf(log_rho), 130, 160,
        ).unwrap();
        let c = Complex64::from_polar(10f64.powf(c_mag), c_arg);
        let s = s_rel / sigma2;
        let a = epsilon_saddlepoint(&p, s).log_value;
        let b = epsilon_saddlepoint(&p.scaled(c), s / c.norm_sqr()).log_value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{} vs {}", a, b);
    }
}
