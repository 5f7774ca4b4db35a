use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::quad_decomposition;
use crate::tail::{log_q, log_tilted_min_expectation};
use crate::{epsilon_rcus_mc, FblError, QuadDecomposition, ScalarChannelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Saddlepoint,
    Normal,
    McIs,
}

/// An estimate of the conditional RCUs error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonEstimate {
    /// Error probability clamped to `[0, 1]`.
    pub value: f64,
    /// Natural log of the unclamped estimate.
    pub log_value: f64,
    pub method: Method,
    pub s: f64,
    /// Tilt used: the saddlepoint for `Saddlepoint`, the sampling tilt for `McIs`.
    pub zeta: f64,
    /// Standard error, Monte Carlo only.
    pub stderr: Option<f64>,
    /// Standard error relative to the estimate; survives underflow of `value`.
    pub rel_stderr: Option<f64>,
    /// Set when the importance weights collapse (effective sample size below 1%).
    pub low_ess: bool,
}

impl EpsilonEstimate {
    pub(crate) fn from_log(log_value: f64, method: Method, s: f64, zeta: f64) -> Self {
        Self {
            value: log_value.exp().min(1.0),
            log_value,
            method,
            s,
            zeta,
            stderr: None,
            rel_stderr: None,
            low_ess: false,
        }
    }

    pub(crate) fn zero(method: Method, s: f64) -> Self {
        Self::from_log(f64::NEG_INFINITY, method, s, 0.0)
    }
}

/// What to do when the saddlepoint lies above 1 (rates below the critical rate)
/// or cannot be reached inside the CGF domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowRateBranch {
    /// Tilt at `ζ = 1` and expand around the shifted tilted mean in closed form.
    TiltAtOne,
    /// Importance-sampled Monte Carlo with tilt `min(ζ*, safe)`, seeded per call.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Root of `κ'(ζ) = -rate` on `[0, domain_max)`.
///
/// Returns 0 when the rate is at or above the mean density (`κ'(0) >= -rate`).
pub fn solve_saddlepoint(rate: f64, dec: &QuadDecomposition) -> Result<f64, FblError> {
    let target = -rate;
    let residual = |zeta: f64| dec.kappa1(zeta) - target;
    if residual(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-12 * rate.abs().max(1.0);

    let mut hi = if dec.domain_max.is_finite() {
        dec.domain_max
    } else {
        // κ' increases to -d as ζ → ∞.
        if -dec.d <= target {
            return Err(FblError::ExponentUnreachable {
                rate,
                domain_max: dec.domain_max,
            });
        }
        let mut hi = 1.0;
        while residual(hi) < 0.0 {
            hi *= 2.0;
        }
        hi
    };
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r.abs() <= tol {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn epsilon_saddlepoint(point: &ScalarChannelPoint, s: f64) -> EpsilonEstimate {
    epsilon_saddlepoint_with(point, s, LowRateBranch::TiltAtOne)
        .expect("closed-form branch does not fail on a valid point")
}

/// Saddlepoint approximation of the conditional RCUs bound.
///
/// With `S` the sum of `n` i.i.d. densities and `t = log(m-1)`, the bound is
/// `E[min(1, e^{t-S})]`. Tilting by the saddlepoint `ζ*` centers `S` at `t`;
/// replacing the tilted law by a Gaussian of variance `nκ''(ζ*)` gives
///
/// `ε ≈ e^{n(κ(ζ*) + ζ*R)} [e^{nζ*²κ''/2} Q(ζ*√(nκ'')) + e^{n(1-ζ*)²κ''/2} Q((1-ζ*)√(nκ''))]`.
///
/// Above `ζ* = 1` the tilt is pinned at 1 and the Gaussian is shifted by
/// `n(-κ'(1) - R)` instead (see [`LowRateBranch`]).
pub fn epsilon_saddlepoint_with(
    point: &ScalarChannelPoint,
    s: f64,
    branch: LowRateBranch,
) -> Result<EpsilonEstimate, FblError> {
    check_s(s)?;
    point.validate()?;
    if point.log_m1 == f64::NEG_INFINITY {
        return Ok(EpsilonEstimate::zero(Method::Saddlepoint, s));
    }
    let dec = quad_decomposition(s, point);
    let rate = point.rate();
    let n = point.n as f64;

    let root = match solve_saddlepoint(rate, &dec) {
        Ok(zeta) if zeta <= 1.0 => {
            let c = dec.cgf_unchecked(zeta);
            let log_value =
                n * (c.kappa + zeta * rate) + log_tilted_min_expectation(zeta, 0.0, n * c.kappa2);
            return Ok(EpsilonEstimate::from_log(log_value, Method::Saddlepoint, s, zeta));
        }
        Ok(zeta) => Some(zeta),
        Err(FblError::ExponentUnreachable { .. }) => None,
        Err(e) => return Err(e),
    };

    match branch {
        LowRateBranch::TiltAtOne => {
            // ζ* > 1 or unreachable both imply 1 < domain_max.
            let c = dec.cgf_unchecked(1.0);
            let shift = n * (-c.kappa1 - rate);
            let log_value =
                n * (c.kappa + rate) + log_tilted_min_expectation(1.0, shift, n * c.kappa2);
            Ok(EpsilonEstimate::from_log(log_value, Method::Saddlepoint, s, 1.0))
        }
        LowRateBranch::MonteCarlo { samples, seed } => {
            let safe = if dec.domain_max.is_finite() {
                0.95 * dec.domain_max
            } else {
                f64::INFINITY
            };
            let tilt = root.unwrap_or(1.0).min(safe);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            epsilon_rcus_mc(point, s, samples, tilt, &mut rng)
        }
    }
}

/// Normal approximation `Q((n·E[i_s] - log(m-1)) / sqrt(n·Var[i_s]))`.
pub fn epsilon_normal(point: &ScalarChannelPoint, s: f64) -> Result<EpsilonEstimate, FblError> {
    check_s(s)?;
    point.validate()?;
    let dec = quad_decomposition(s, point);
    let n = point.n as f64;
    let margin = n * dec.mean() - point.log_m1;
    let var = n * dec.variance();
    let log_value = if var > 0.0 {
        log_q(margin / var.sqrt())
    } else if margin > 0.0 {
        f64::NEG_INFINITY
    } else if margin < 0.0 {
        0.0
    } else {
        0.5f64.ln()
    };
    Ok(EpsilonEstimate::from_log(log_value, Method::Normal, s, 0.0))
}

pub(crate) fn check_s(s: f64) -> Result<(), FblError> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(FblError::InvalidS(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fixture(log_m1: f64, n: usize) -> ScalarChannelPoint {
        ScalarChannelPoint::new(c(1.0, 0.0), c(1.0, 0.0), 1.0, 1.0, n, log_m1).unwrap()
    }

    #[test]
    fn critical_rate_gives_zero_tilt() {
        let p = fixture(1.0, 100);
        let dec = quad_decomposition(1.0, &p);
        assert_eq!(solve_saddlepoint(dec.mean(), &dec).unwrap(), 0.0);
        assert_eq!(solve_saddlepoint(dec.mean() + 0.3, &dec).unwrap(), 0.0);
    }

    #[test]
    fn saddlepoint_root_is_continuous_below_the_mean() {
        let p = fixture(1.0, 100);
        let dec = quad_decomposition(1.0, &p);
        let mut prev = 0.0;
        for k in 1..=200 {
            let rate = dec.mean() * (1.0 - k as f64 * 1e-3);
            let zeta = solve_saddlepoint(rate, &dec).unwrap();
            assert!(zeta > prev);
            assert!(zeta - prev < 0.01, "jump at k = {k}: {prev} -> {zeta}");
            prev = zeta;
        }
    }

    #[test]
    fn saddlepoint_root_matches_grid_scan() {
        let p = fixture(1.0, 100);
        let dec = quad_decomposition(1.0, &p);
        let rate = 0.5 * dec.mean();
        let zeta = solve_saddlepoint(rate, &dec).unwrap();
        // Dense scan for the sign change of κ'(ζ) + R.
        let steps = 1_000_000;
        let h = dec.domain_max / steps as f64;
        let mut crossing = None;
        for k in 0..steps {
            let z0 = k as f64 * h;
            if dec.kappa1(z0) + rate < 0.0 && dec.kappa1(z0 + h) + rate >= 0.0 {
                crossing = Some(z0 + 0.5 * h);
                break;
            }
        }
        let crossing = crossing.unwrap();
        assert!((zeta - crossing).abs() <= h, "{zeta} vs {crossing}");
        assert!((dec.kappa1(zeta) + rate).abs() < 1e-11);
    }

    #[test]
    fn unreachable_when_density_is_bounded_below_by_rate() {
        // ĝ = 0 with ρ > 0 makes A = 0; put d > 0 by hand through a tiny ĝ.
        let dec = QuadDecomposition {
            lambda1: 0.5,
            lambda2: 0.0,
            d: 1.0,
            s: 1.0,
            domain_max: f64::INFINITY,
            a: [[c(0.0, 0.0); 2]; 2],
            scales: [1.0, 1.0],
        };
        assert!(matches!(
            solve_saddlepoint(0.9, &dec),
            Err(FblError::ExponentUnreachable { .. })
        ));
        let z = solve_saddlepoint(1.2, &dec).unwrap();
        assert!((dec.kappa1(z) + 1.2).abs() < 1e-11);
    }

    #[test]
    fn single_codeword_never_errs() {
        let p = fixture(f64::NEG_INFINITY, 50);
        let e = epsilon_saddlepoint(&p, 1.0);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn normal_approximation_fixture() {
        let p = fixture(100.0 * 2f64.ln(), 100);
        let e = epsilon_normal(&p, 1.0).unwrap();
        assert!((e.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_and_saddlepoint_agree_near_half() {
        for &n in &[100usize, 300] {
            let p = fixture(n as f64 * 2f64.ln() * 0.995, n);
            let sp = epsilon_saddlepoint(&p, 1.0);
            let na = epsilon_normal(&p, 1.0).unwrap();
            assert!(na.value > 0.3 && na.value < 0.7);
            assert!(((sp.value - na.value) / na.value).abs() < 0.10, "n={n}: {} vs {}", sp.value, na.value);
        }
    }

    #[test]
    fn zero_variance_normal_is_a_step() {
        let p = ScalarChannelPoint::new(c(1.0, 0.0), c(1.0, 0.0), 1.0, 0.0, 10, 0.5).unwrap();
        assert_eq!(epsilon_normal(&p, 1.0).unwrap().value, 1.0);
        let p = ScalarChannelPoint::new(c(1.0, 0.0), c(1.0, 0.0), 1.0, 0.0, 10, -1.0).unwrap();
        assert_eq!(epsilon_normal(&p, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn rejects_nonpositive_s() {
        let p = fixture(1.0, 10);
        assert!(matches!(
            epsilon_saddlepoint_with(&p, 0.0, LowRateBranch::TiltAtOne),
            Err(FblError::InvalidS(_))
        ));
        assert!(epsilon_normal(&p, -1.0).is_err());
    }

    #[test]
    fn low_rate_branch_is_continuous_at_unit_tilt() {
        // Sweep the rate across the critical rate -κ'(1); the estimate must not jump.
        let g = c(0.9, 0.2);
        let p0 = ScalarChannelPoint::new(g, g * 0.97, 0.05, 1.0, 130, 0.0).unwrap();
        let s = 1.0 / p0.sigma2;
        let dec = quad_decomposition(s, &p0);
        let critical = -dec.kappa1(1.0);
        let at = |rate: f64| {
            let p = ScalarChannelPoint { log_m1: rate * 130.0, ..p0 };
            epsilon_saddlepoint(&p, s).log_value
        };
        let below = at(critical * (1.0 - 1e-9));
        let above = at(critical * (1.0 + 1e-9));
        assert!((below - above).abs() < 1e-5, "{below} vs {above}");
    }
}
