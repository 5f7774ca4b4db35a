//! Large-scale fading, local-scattering spatial correlation and correlated
//! Rayleigh sampling.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalues of a correlation matrix below `-PSD_FLOOR·β` mean the matrix is corrupt.
pub const PSD_FLOOR: f64 = 1e-8;

/// Large-scale gain in dB at 3-D distance `d` meters.
pub fn pathloss_db(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Config(format!("distance must be positive, got {d}")));
    }
    Ok(-30.5 - 37.6 * d.log10())
}

pub fn pathloss_linear(d: f64) -> Result<f64> {
    Ok(crate::config::db_to_linear(pathloss_db(d)?))
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Node count used for an `m`-antenna array: the configured count, raised
/// when the integrand oscillates faster than that rule can resolve.
pub fn nodes_for(m: usize, delta: f64, configured: usize) -> usize {
    let omega = PI * m.saturating_sub(1) as f64 * delta;
    configured.max(omega.ceil() as usize + 40)
}

/// Spatial correlation of one (UE, AP) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub entries: DMatrix<Complex64>,
    pub beta: f64,
}

/// Local-scattering model for a half-wavelength ULA: scatterers uniform in
/// `[φ−Δ, φ+Δ]`. The matrix is Hermitian Toeplitz, so only the first column
/// is integrated.
pub fn local_scattering_corr(beta: f64, phi: f64, delta: f64, m: usize, rule: &GaussLegendre) -> CorrelationMatrix {
    let first: Vec<Complex64> = (0..m)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let arg = PI * k as f64 * (phi + delta * t).sin();
                acc += Complex64::from_polar(*w, arg);
            }
            acc * (0.5 * beta)
        })
        .collect();
    let entries = DMatrix::from_fn(m, m, |r, c| {
        if r >= c {
            first[r - c]
        } else {
            first[c - r].conj()
        }
    });
    CorrelationMatrix { entries, beta }
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `F` with `F Fᴴ = R` from the Hermitian eigendecomposition; slightly
    /// negative eigenvalues from rounding are clipped.
    pub fn factor(&self) -> Result<DMatrix<Complex64>> {
        let m = self.dim();
        if m == 1 {
            let v = self.entries[(0, 0)].re;
            if v < -PSD_FLOOR * self.beta {
                return Err(Error::Numerical(format!("negative channel variance {v}")));
            }
            return Ok(DMatrix::from_element(1, 1, Complex64::new(v.max(0.0).sqrt(), 0.0)));
        }
        let eig = self.entries.clone().symmetric_eigen();
        let mut f = eig.eigenvectors;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -PSD_FLOOR * self.beta {
                return Err(Error::Numerical(format!(
                    "correlation matrix has eigenvalue {lambda:e} (beta = {:e})",
                    self.beta
                )));
            }
            let scale = lambda.max(0.0).sqrt();
            f.column_mut(j).scale_mut(scale);
        }
        Ok(f)
    }
}

/// `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| complex_normal(rng))
}

/// Correlation matrices and their factors for every (UE, AP) pair.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub k: usize,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    /// Indexed `i * num_aps + l`.
    pub corrs: Vec<CorrelationMatrix>,
    factors: Vec<DMatrix<Complex64>>,
}

impl ChannelModel {
    pub fn new(k: usize, num_aps: usize, corrs: Vec<CorrelationMatrix>) -> Result<Self> {
        assert_eq!(corrs.len(), k * num_aps, "one correlation matrix per (UE, AP) pair");
        let antennas_per_ap = corrs.first().map_or(0, CorrelationMatrix::dim);
        let factors = corrs.iter().map(CorrelationMatrix::factor).collect::<Result<_>>()?;
        Ok(Self {
            k,
            num_aps,
            antennas_per_ap,
            corrs,
            factors,
        })
    }

    pub fn corr(&self, i: usize, l: usize) -> &CorrelationMatrix {
        &self.corrs[i * self.num_aps + l]
    }

    pub fn beta(&self, i: usize, l: usize) -> f64 {
        self.corr(i, l).beta
    }

    pub fn total_antennas(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }

    /// Block range of AP `l` inside a collective vector.
    pub fn block(&self, l: usize) -> std::ops::Range<usize> {
        l * self.antennas_per_ap..(l + 1) * self.antennas_per_ap
    }

    /// AP with the largest large-scale gain towards UE `i` (lowest index on ties).
    pub fn strongest_ap(&self, i: usize) -> usize {
        (0..self.num_aps).fold(0, |best, l| if self.beta(i, l) > self.beta(i, best) { l } else { best })
    }

    /// One realization of all collective channels, column `i` being `h_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let m = self.antennas_per_ap;
        let mut h = DMatrix::zeros(self.total_antennas(), self.k);
        for i in 0..self.k {
            for l in 0..self.num_aps {
                let w = complex_normal_vector(m, rng);
                let block = &self.factors[i * self.num_aps + l] * w;
                h.view_mut((l * m, i), (m, 1)).copy_from(&block);
            }
        }
        h
    }
}
