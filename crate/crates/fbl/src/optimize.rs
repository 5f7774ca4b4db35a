use crate::{epsilon_saddlepoint_with, EpsilonEstimate, LowRateBranch, Method, ScalarChannelPoint};

/// Exponents `j` of the coarse grid `s = 2^j / σ̃²`, with `σ̃²` the
/// [`metric_noise`](ScalarChannelPoint::metric_noise) of the point.
pub const S_GRID_EXPONENTS: std::ops::RangeInclusive<i32> = -6..=6;

const GOLDEN_ITERATIONS: usize = 20;

pub fn optimize_s(point: &ScalarChannelPoint) -> (f64, EpsilonEstimate) {
    optimize_s_with(point, LowRateBranch::TiltAtOne)
}

/// Minimizes the saddlepoint estimate over `s`.
///
/// Coarse log-grid `s = 2^j/σ̃²`, `j = -6..6`, then golden-section search in
/// `log2(sσ̃²)` over the two grid cells around the grid minimizer. Working in
/// units of `1/σ̃²` keeps the search scale-free. `σ̃²` includes the gain
/// mismatch, so a decoder whose error is dominated by `g ≠ ĝ` rather than by
/// noise still gets a grid around its useful `s`.
pub fn optimize_s_with(point: &ScalarChannelPoint, branch: LowRateBranch) -> (f64, EpsilonEstimate) {
    let inv_noise = 1.0 / point.metric_noise();
    let eval = |j: f64| {
        let s = j.exp2() * inv_noise;
        epsilon_saddlepoint_with(point, s, branch).expect("valid point and positive s")
    };

    if point.log_m1 == f64::NEG_INFINITY {
        return (inv_noise, eval(0.0));
    }

    let mut best_j = 0.0;
    let mut best: Option<EpsilonEstimate> = None;
    let mut all_mc = true;
    for j in S_GRID_EXPONENTS {
        let e = eval(j as f64);
        all_mc &= e.method == Method::McIs;
        if best.is_none_or(|b| e.log_value < b.log_value) {
            best = Some(e);
            best_j = j as f64;
        }
    }
    let mut best = best.expect("grid is nonempty");
    if all_mc {
        return (best.s, best);
    }

    let lo_edge = *S_GRID_EXPONENTS.start() as f64;
    let hi_edge = *S_GRID_EXPONENTS.end() as f64;
    let mut a = (best_j - 1.0).max(lo_edge);
    let mut b = (best_j + 1.0).min(hi_edge);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..GOLDEN_ITERATIONS {
        if f1.log_value <= f2.log_value {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2);
        }
    }
    for cand in [f1, f2] {
        if cand.log_value < best.log_value {
            best = cand;
        }
    }
    (best.s, best)
}
