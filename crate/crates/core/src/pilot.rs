//! Orthogonal uplink pilots and per-(UE, AP) MMSE channel estimation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_normal, ChannelModel, CorrelationMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PilotConfig {
    pub np: usize,
    /// Linear milliwatts.
    pub rho_ul: f64,
    pub sigma2_ul: f64,
    /// Pilot index of each UE.
    pub assignment: Vec<usize>,
}

impl PilotConfig {
    /// UE `i` gets pilot `i`.
    pub fn orthogonal(k: usize, np: usize, rho_ul: f64, sigma2_ul: f64) -> Self {
        Self {
            np,
            rho_ul,
            sigma2_ul,
            assignment: (0..k).collect(),
        }
    }

    /// Only injective assignments into `np` orthogonal pilots are supported.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.np];
        for (ue, &p) in self.assignment.iter().enumerate() {
            if p >= self.np {
                return Err(Error::Config(format!(
                    "UE {ue} uses pilot {p}, but only {} pilots exist",
                    self.np
                )));
            }
            if std::mem::replace(&mut used[p], true) {
                return Err(Error::Unsupported(format!(
                    "pilot {p} is shared by several UEs; pilot contamination is not modeled"
                )));
            }
        }
        if !(self.sigma2_ul > 0.0) || !(self.rho_ul >= 0.0) {
            return Err(Error::Config("pilot power must be >= 0 and noise power > 0".into()));
        }
        Ok(())
    }

    /// `ρ·np`, the despread pilot energy.
    pub fn pilot_energy(&self) -> f64 {
        self.rho_ul * self.np as f64
    }
}

/// Despread pilot observations `y_il = √(ρ np)·h_il + CN(0, σ²I)`, one column
/// per UE. This is the sufficient statistic of the `M×np` pilot block
/// projected on each UE's pilot, sampled directly.
pub fn despread_pilots<R: Rng + ?Sized>(
    h: &DMatrix<Complex64>,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    cfg.validate()?;
    let amp = cfg.pilot_energy().sqrt();
    let sd = cfg.sigma2_ul.sqrt();
    Ok(h.map(|x| x * amp + complex_normal(rng) * sd))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub hhat: nalgebra::DVector<Complex64>,
    pub phi: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
}

/// Fixed part of the MMSE estimator of one (UE, AP) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTerms {
    /// `√(ρ np)·R·(ρ np R + σ²I)⁻¹`.
    pub gain: DMatrix<Complex64>,
    pub phi: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
}

pub fn estimator_terms(r: &CorrelationMatrix, cfg: &PilotConfig) -> Result<EstimatorTerms> {
    let m = r.dim();
    let energy = cfg.pilot_energy();
    let q = r.entries.map(|x| x * energy) + DMatrix::<Complex64>::identity(m, m) * Complex64::from(cfg.sigma2_ul);
    let chol = q
        .cholesky()
        .ok_or_else(|| Error::Numerical("pilot covariance is not positive definite".into()))?;
    // R and Q are Hermitian, so R·Q⁻¹ = (Q⁻¹·R)ᴴ.
    let q_inv_r = chol.solve(&r.entries);
    let gain = q_inv_r.adjoint() * Complex64::from(energy.sqrt());
    let mut phi = &gain * &r.entries * Complex64::from(energy.sqrt());
    phi = (&phi + phi.adjoint()) * Complex64::from(0.5);
    let c = &r.entries - &phi;
    Ok(EstimatorTerms { gain, phi, c })
}

pub fn mmse_channel_estimate(
    y: &nalgebra::DVector<Complex64>,
    r: &CorrelationMatrix,
    cfg: &PilotConfig,
) -> Result<ChannelEstimate> {
    let t = estimator_terms(r, cfg)?;
    Ok(ChannelEstimate {
        hhat: &t.gain * y,
        phi: t.phi,
        c: t.c,
    })
}

/// Estimator terms for every (UE, AP) pair of a placement.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    pub k: usize,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    /// Indexed `i * num_aps + l`.
    pub terms: Vec<EstimatorTerms>,
    pub pilots: PilotConfig,
}

impl EstimatorBank {
    pub fn new(model: &ChannelModel, pilots: PilotConfig) -> Result<Self> {
        pilots.validate()?;
        if pilots.assignment.len() != model.k {
            return Err(Error::Config(format!(
                "pilot assignment covers {} UEs, the network has {}",
                pilots.assignment.len(),
                model.k
            )));
        }
        let terms = model
            .corrs
            .iter()
            .map(|r| estimator_terms(r, &pilots))
            .collect::<Result<_>>()?;
        Ok(Self {
            k: model.k,
            num_aps: model.num_aps,
            antennas_per_ap: model.antennas_per_ap,
            terms,
            pilots,
        })
    }

    pub fn terms(&self, i: usize, l: usize) -> &EstimatorTerms {
        &self.terms[i * self.num_aps + l]
    }

    /// Collective estimates `ĥ_i` (columns) from despread observations.
    pub fn estimate(&self, y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let m = self.antennas_per_ap;
        let mut hhat = DMatrix::zeros(y.nrows(), y.ncols());
        for i in 0..self.k {
            for l in 0..self.num_aps {
                let yl = y.view((l * m, i), (m, 1));
                let est = &self.terms(i, l).gain * yl;
                hhat.view_mut((l * m, i), (m, 1)).copy_from(&est);
            }
        }
        hhat
    }

    /// Channels, pilots and estimates for one fading realization.
    pub fn draw<R: Rng + ?Sized>(&self, model: &ChannelModel, rng: &mut R) -> Result<FadingDraw> {
        let h = model.sample(rng);
        let y = despread_pilots(&h, &self.pilots, rng)?;
        let hhat = self.estimate(&y);
        Ok(FadingDraw { h, hhat })
    }
}

/// True and estimated collective channels of one realization (UE per column).
#[derive(Debug, Clone)]
pub struct FadingDraw {
    pub h: DMatrix<Complex64>,
    pub hhat: DMatrix<Complex64>,
}
