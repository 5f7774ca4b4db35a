//! Gaussian tail helpers evaluated in the log domain.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 26.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        // Asymptotic series; truncation error below 1e-15 at x >= 26.
        let inv2x2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=6 {
            term *= -((2 * k - 1) as f64) * inv2x2;
            sum += term;
        }
        sum / (x * PI.sqrt())
    }
}

/// Standard Gaussian tail `Q(x) = P[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `log Q(x)`, finite for every finite `x`.
pub fn log_q(x: f64) -> f64 {
    if x >= 0.0 {
        (0.5 * erfcx(x * FRAC_1_SQRT_2)).ln() - 0.5 * x * x
    } else {
        (-q_function(-x)).ln_1p()
    }
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log E[exp(a·Y); Y < 0]` for `Y ~ N(mean, var)`, `var > 0`.
fn log_lower_mgf(a: f64, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let x = (mean + a * var) / sd;
    if x >= 0.0 {
        // a·m + a²v/2 − x²/2 collapses to −m²/(2v).
        -mean * mean / (2.0 * var) + (0.5 * erfcx(x * FRAC_1_SQRT_2)).ln()
    } else {
        a * mean + 0.5 * a * a * var + log_q(x)
    }
}

/// `log E[exp(b·Y); Y >= 0]` for `Y ~ N(mean, var)`, `var > 0`.
fn log_upper_mgf(b: f64, mean: f64, var: f64) -> f64 {
    // Y >= 0 with Y ~ N(m, v) is −Y < 0 with −Y ~ N(−m, v).
    log_lower_mgf(-b, -mean, var)
}

/// `log E[min(1, exp(-Y))·exp(tilt·Y)]` for `Y ~ N(mean, var)`.
///
/// This is the tilted-domain factor of the RCUs saddlepoint expansion. With
/// `mean = 0` it reduces to `log(e^{v ζ²/2} Q(ζ√v) + e^{v(1-ζ)²/2} Q((1-ζ)√v))`.
pub fn log_tilted_min_expectation(tilt: f64, mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return (-mean).min(0.0) + tilt * mean;
    }
    let lower = log_lower_mgf(tilt, mean, var);
    let upper = log_upper_mgf(tilt - 1.0, mean, var);
    log_add_exp(lower, upper)
}
