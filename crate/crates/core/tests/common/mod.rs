//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use cfmimo::channel::{local_scattering_corr, CorrelationMatrix, GaussLegendre};
use cfmimo::pilot::PilotConfig;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Antennas of the estimation fixture.
pub const M: usize = 3;

pub fn estimation_corr() -> CorrelationMatrix {
    local_scattering_corr(1.0, 0.7, 20f64.to_radians(), M, &GaussLegendre::new(200))
}

/// Per-pilot SNR of 0 dB, so the np = 4 processing gain matters.
pub fn estimation_pilots() -> PilotConfig {
    PilotConfig::orthogonal(1, 4, 1.0, 1.0)
}

/// Running moments of the outer product `a bᴴ` of two column vectors.
pub struct Moments {
    dim: usize,
    sum: DMatrix<Complex64>,
    sum_sq: DMatrix<f64>,
    count: usize,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sum: DMatrix::zeros(dim, dim),
            sum_sq: DMatrix::zeros(dim, dim),
            count: 0,
        }
    }

    pub fn push(&mut self, a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) {
        for r in 0..self.dim {
            for c in 0..self.dim {
                let x = a[(r, 0)] * b[(c, 0)].conj();
                self.sum[(r, c)] += x;
                self.sum_sq[(r, c)] += x.norm_sqr();
            }
        }
        self.count += 1;
    }

    /// Largest `|mean - expected|` in units of the entry's standard error.
    pub fn max_z(&self, expected: &DMatrix<Complex64>) -> f64 {
        let n = self.count as f64;
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let mean = self.sum[(r, c)] / n;
                let se = ((self.sum_sq[(r, c)] / n - mean.norm_sqr()) / n).sqrt();
                worst = worst.max((mean - expected[(r, c)]).norm() / se);
            }
        }
        worst
    }
}
