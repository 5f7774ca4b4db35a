use num_complex::Complex64;

use crate::{FblError, ScalarChannelPoint};

/// Generalized information density of one symbol pair, in nats.
///
/// `i_s(q, v) = -s|v - ĝq|^2 + s|v|^2 / (1 + sρ|ĝ|^2) + log(1 + sρ|ĝ|^2)`.
pub fn gen_info_density(s: f64, point: &ScalarChannelPoint, q: Complex64, v: Complex64) -> f64 {
    let gamma = s * point.rho * point.ghat.norm_sqr();
    -s * (v - point.ghat * q).norm_sqr() + s * v.norm_sqr() / (1.0 + gamma) + gamma.ln_1p()
}

/// Eigen-form of the information density as a quadratic form.
///
/// With `w = (q, z)` and `z = v - g q`, the density equals `wᴴ A w + d`.
/// Because `w ~ CN(0, diag(ρ, σ²))`, its distribution is fixed by the two real
/// eigenvalues of `diag(ρ, σ²)·A` and the constant `d`. The eigenvalues depend
/// on the point only through scale-free products (`sρ|ĝ|²`, `sσ²`, ...), so
/// the decomposition is invariant under `(g, ĝ, σ², s) → (cg, cĝ, |c|²σ², s/|c|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadDecomposition {
    /// Largest eigenvalue (always `>= 0`).
    pub lambda1: f64,
    /// Smallest eigenvalue (always `<= 0`).
    pub lambda2: f64,
    pub d: f64,
    pub s: f64,
    /// Largest `ζ` with `1 + ζλ_j > 0` for both eigenvalues.
    pub domain_max: f64,
    /// The Hermitian matrix `A` in the original `(q, z)` coordinates.
    pub a: [[Complex64; 2]; 2],
    /// `(√ρ, σ)`: standard deviations of `(q, z)`.
    pub scales: [f64; 2],
}

/// Value and first two derivatives of `κ(ζ) = log E[exp(-ζ i_s)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfTriple {
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

pub fn quad_decomposition(s: f64, point: &ScalarChannelPoint) -> QuadDecomposition {
    let rho = point.rho;
    let sigma2 = point.sigma2;
    let diff = point.g - point.ghat;

    let gamma = s * rho * point.ghat.norm_sqr();
    let e = s * rho * diff.norm_sqr();
    let f = s * rho * point.g.norm_sqr();
    let t = s * sigma2;

    let trace = -(e + t) + (f + t) / (1.0 + gamma);
    // ‖x‖²‖y‖² − |xᴴy|² collapses to ρσ²|ĝ|² (Lagrange identity).
    let det = -t * gamma / (1.0 + gamma);
    let (lambda1, lambda2) = symmetric_roots(trace, det);

    let domain_max = if lambda2 < 0.0 {
        -1.0 / lambda2
    } else {
        f64::INFINITY
    };

    let s_prime = s / (1.0 + gamma);
    let c1 = [diff, Complex64::new(1.0, 0.0)];
    let c2 = [point.g, Complex64::new(1.0, 0.0)];
    let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            a[k][l] = -s * c1[k].conj() * c1[l] + s_prime * c2[k].conj() * c2[l];
        }
    }

    QuadDecomposition {
        lambda1,
        lambda2,
        d: gamma.ln_1p(),
        s,
        domain_max,
        a,
        scales: [rho.sqrt(), sigma2.sqrt()],
    }
}

/// Roots of `x² - trace·x + det` with `det <= 0`, ordered `(max, min)`.
fn symmetric_roots(trace: f64, det: f64) -> (f64, f64) {
    let disc = (trace * trace - 4.0 * det).max(0.0);
    let sq = disc.sqrt();
    if trace == 0.0 {
        return (0.5 * sq, -0.5 * sq);
    }
    if trace > 0.0 {
        let big = 0.5 * (trace + sq);
        (big, det / big)
    } else {
        let small = 0.5 * (trace - sq);
        (det / small, small)
    }
}

impl QuadDecomposition {
    pub fn lambdas(&self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }

    /// `E[i_s] = -κ'(0)`.
    pub fn mean(&self) -> f64 {
        self.d + self.lambda1 + self.lambda2
    }

    /// `Var[i_s] = κ''(0)`.
    pub fn variance(&self) -> f64 {
        self.lambda1 * self.lambda1 + self.lambda2 * self.lambda2
    }

    pub fn in_domain(&self, zeta: f64) -> bool {
        zeta >= 0.0 && zeta < self.domain_max
    }

    pub fn cgf(&self, zeta: f64) -> Result<CgfTriple, FblError> {
        if !self.in_domain(zeta) {
            return Err(FblError::Domain {
                zeta,
                domain_max: self.domain_max,
            });
        }
        Ok(self.cgf_unchecked(zeta))
    }

    pub(crate) fn cgf_unchecked(&self, zeta: f64) -> CgfTriple {
        let mut kappa = -zeta * self.d;
        let mut kappa1 = -self.d;
        let mut kappa2 = 0.0;
        for lambda in self.lambdas() {
            let ratio = lambda / (1.0 + zeta * lambda);
            kappa -= (zeta * lambda).ln_1p();
            kappa1 -= ratio;
            kappa2 += ratio * ratio;
        }
        CgfTriple {
            kappa,
            kappa1,
            kappa2,
        }
    }

    pub(crate) fn kappa1(&self, zeta: f64) -> f64 {
        -self.d
            - self
                .lambdas()
                .iter()
                .map(|&l| l / (1.0 + zeta * l))
                .sum::<f64>()
    }

    /// `wᴴ A w + d` for `w = (q, z)`.
    pub fn density(&self, q: Complex64, z: Complex64) -> f64 {
        let w = [q, z];
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..2 {
            for l in 0..2 {
                acc += w[k].conj() * self.a[k][l] * w[l];
            }
        }
        acc.re + self.d
    }

    /// `diag(√ρ, σ)·A·diag(√ρ, σ)`, the form in whitened coordinates.
    pub fn whitened(&self) -> [[Complex64; 2]; 2] {
        let mut m = self.a;
        for (k, row) in m.iter_mut().enumerate() {
            for (l, entry) in row.iter_mut().enumerate() {
                *entry *= self.scales[k] * self.scales[l];
            }
        }
        m
    }
}
