use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::{gen_info_density, quad_decomposition};
use crate::saddlepoint::check_s;
use crate::{EpsilonEstimate, FblError, Method, ScalarChannelPoint};

const MIN_SAMPLES: usize = 1_000;

/// Importance-sampled Monte Carlo estimate of the conditional RCUs bound.
///
/// Uses `P[S <= log((m-1)/u)] = E[min(1, (m-1)e^{-S})]` for `u ~ U[0,1]`, so
/// each sampled codeword contributes a smooth value instead of an indicator.
/// Symbols `(q, z)` are drawn from the `ζ`-tilted law
/// `CN(0, (Σ⁻¹ + ζA)⁻¹)`, sampled in whitened coordinates so that `ρ = 0` is
/// allowed; each codeword carries the likelihood ratio `e^{nκ(ζ) + ζS}`.
/// The density itself is evaluated with [`gen_info_density`] on the sampled
/// `(q, v)`, not through the eigen-form. `ζ = 0` is plain Monte Carlo.
pub fn epsilon_rcus_mc<R: Rng + ?Sized>(
    point: &ScalarChannelPoint,
    s: f64,
    samples: usize,
    zeta: f64,
    rng: &mut R,
) -> Result<EpsilonEstimate, FblError> {
    check_s(s)?;
    point.validate()?;
    if samples < MIN_SAMPLES {
        return Err(FblError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples,
        });
    }
    let dec = quad_decomposition(s, point);
    let cgf = dec.cgf(zeta)?;
    if point.log_m1 == f64::NEG_INFINITY {
        let mut est = EpsilonEstimate::zero(Method::McIs, s);
        est.zeta = zeta;
        est.stderr = Some(0.0);
        est.rel_stderr = Some(0.0);
        return Ok(est);
    }

    let factor = tilted_factor(&dec.whitened(), zeta);
    let [sd_q, sd_z] = dec.scales;
    let n = point.n;
    let log_lr_offset = n as f64 * cgf.kappa;

    let mut log_contrib = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut sum = 0.0;
        for _ in 0..n {
            let e1 = complex_normal(rng);
            let e2 = complex_normal(rng);
            let x1 = factor[0][0] * e1;
            let x2 = factor[1][0] * e1 + factor[1][1] * e2;
            let q = x1 * sd_q;
            let z = x2 * sd_z;
            let v = point.g * q + z;
            sum += gen_info_density(s, point, q, v);
        }
        let lw = log_lr_offset + zeta * sum;
        log_contrib.push((point.log_m1 - sum).min(0.0) + lw);
    }

    let (mean, stderr, log_mean, rel_stderr) = log_domain_mean(&log_contrib);
    let ess = effective_sample_size(&log_contrib);
    Ok(EpsilonEstimate {
        value: mean.min(1.0),
        log_value: log_mean,
        method: Method::McIs,
        s,
        zeta,
        stderr: Some(stderr),
        rel_stderr: Some(rel_stderr),
        low_ess: ess < 0.01 * samples as f64,
    })
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Lower Cholesky factor of `(I + ζM)⁻¹` for a Hermitian 2×2 `M`.
fn tilted_factor(m: &[[Complex64; 2]; 2], zeta: f64) -> [[Complex64; 2]; 2] {
    let b11 = 1.0 + zeta * m[0][0].re;
    let b22 = 1.0 + zeta * m[1][1].re;
    let b12 = m[0][1] * zeta;
    let det = b11 * b22 - b12.norm_sqr();
    // Inverse of [[b11, b12], [conj(b12), b22]].
    let g11 = b22 / det;
    let g22 = b11 / det;
    let g21 = -b12.conj() / det;
    let l11 = g11.sqrt();
    let l21 = g21 / l11;
    let l22 = (g22 - l21.norm_sqr()).max(0.0).sqrt();
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::new(l11, 0.0), zero],
        [l21, Complex64::new(l22, 0.0)],
    ]
}

/// Mean, standard error, log-mean and relative standard error of `exp(x_k)`.
fn log_domain_mean(logs: &[f64]) -> (f64, f64, f64, f64) {
    let n = logs.len() as f64;
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (0.0, 0.0, f64::NEG_INFINITY, 0.0);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in logs {
        let x = (l - max).exp();
        s1 += x;
        s2 += x * x;
    }
    let m1 = s1 / n;
    let m2 = s2 / n;
    let var = (m2 - m1 * m1).max(0.0) * n / (n - 1.0);
    let scale = max.exp();
    let log_mean = max + m1.ln();
    let se = (var / n).sqrt();
    (m1 * scale, se * scale, log_mean, se / m1)
}

/// Kish effective sample size of the weighted contributions.
fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in log_weights {
        let x = (l - max).exp();
        s1 += x;
        s2 += x * x;
    }
    s1 * s1 / s2
}
