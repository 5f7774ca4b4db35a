//! Centralized combining, precoding and reduction of each link
//! to the scalar mismatched-decoding channel.

use cfmimo_fbl::ScalarChannelPoint;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::geometry::Mode;
use crate::pilot::{EstimatorBank, FadingDraw};

/// Fewer fades than this give an unreliable precoder normalization.
pub const MIN_HARDENING_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mr,
    Mmse,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mr => "mr",
            Scheme::Mmse => "mmse",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(Scheme::Mr),
            "mmse" => Ok(Scheme::Mmse),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the reduction of one link needs besides the channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub rho: f64,
    pub sigma2: f64,
    pub n: usize,
    pub log_m1: f64,
}

fn c64(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn ensure_finite(m: &DMatrix<Complex64>, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} has non-finite entries")))
    }
}

/// Placement-dependent part of the combiner computation.
#[derive(Debug, Clone)]
pub struct Processor {
    pub mode: Mode,
    pub scheme: Scheme,
    pub rho_ul: f64,
    pub sigma2_ul: f64,
    m: usize,
    num_aps: usize,
    /// `(ρ Σ_j C_jl + σ² I)⁻¹` per AP; empty for MR.
    d_inv: Vec<DMatrix<Complex64>>,
    /// Serving AP of each UE (small-cell mode).
    serving: Vec<usize>,
}

impl Processor {
    pub fn new(mode: Mode, scheme: Scheme, model: &ChannelModel, bank: &EstimatorBank) -> Result<Self> {
        let (rho_ul, sigma2_ul) = (bank.pilots.rho_ul, bank.pilots.sigma2_ul);
        let m = model.antennas_per_ap;
        let d_inv = match scheme {
            Scheme::Mr => Vec::new(),
            Scheme::Mmse => (0..model.num_aps)
                .map(|l| {
                    let mut d = DMatrix::<Complex64>::identity(m, m) * c64(sigma2_ul);
                    for j in 0..model.k {
                        d += &bank.terms(j, l).c * c64(rho_ul);
                    }
                    d.cholesky()
                        .map(|c| c.inverse())
                        .ok_or_else(|| Error::Numerical(format!("error covariance block of AP {l} is singular")))
                })
                .collect::<Result<_>>()?,
        };
        let serving = match mode {
            Mode::SmallCell => (0..model.k).map(|i| model.strongest_ap(i)).collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            mode,
            scheme,
            rho_ul,
            sigma2_ul,
            m,
            num_aps: model.num_aps,
            d_inv,
            serving,
        })
    }

    pub fn serving_ap(&self, i: usize) -> Option<usize> {
        self.serving.get(i).copied()
    }

    /// Combining vectors `u_i` as the columns of an `N×K` matrix.
    pub fn combiners(&self, hhat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let u = match (self.mode, self.scheme) {
            (Mode::SmallCell, scheme) => self.small_cell(hhat, scheme)?,
            (_, Scheme::Mr) => hhat.clone(),
            (_, Scheme::Mmse) => woodbury_mmse(&self.d_inv, self.m, hhat, self.rho_ul)?,
        };
        ensure_finite(&u, "combiner")?;
        Ok(u)
    }

    fn small_cell(&self, hhat: &DMatrix<Complex64>, scheme: Scheme) -> Result<DMatrix<Complex64>> {
        let m = self.m;
        let k = hhat.ncols();
        let mut u = DMatrix::zeros(hhat.nrows(), k);
        for l in 0..self.num_aps {
            let served: Vec<usize> = (0..k).filter(|&i| self.serving[i] == l).collect();
            if served.is_empty() {
                continue;
            }
            let local = hhat.rows(l * m, m).into_owned();
            let ul = match scheme {
                Scheme::Mr => local,
                Scheme::Mmse => woodbury_mmse(std::slice::from_ref(&self.d_inv[l]), m, &local, self.rho_ul)?,
            };
            for i in served {
                u.view_mut((l * m, i), (m, 1)).copy_from(&ul.column(i));
            }
        }
        Ok(u)
    }
}

/// `ρ (ρ Ĥ Ĥᴴ + D)⁻¹ Ĥ = ρ D⁻¹Ĥ (I + ρ Ĥᴴ D⁻¹ Ĥ)⁻¹` for block-diagonal `D`,
/// given the inverse blocks. Only a `K×K` system is factored.
fn woodbury_mmse(
    d_inv: &[DMatrix<Complex64>],
    m: usize,
    hhat: &DMatrix<Complex64>,
    rho: f64,
) -> Result<DMatrix<Complex64>> {
    let k = hhat.ncols();
    let mut x = DMatrix::zeros(hhat.nrows(), k);
    for (l, block) in d_inv.iter().enumerate() {
        let prod = block * hhat.rows(l * m, m);
        x.rows_mut(l * m, m).copy_from(&prod);
    }
    let mut s = hhat.adjoint() * &x * c64(rho);
    for j in 0..k {
        s[(j, j)] += c64(1.0);
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical("MMSE system is not positive definite".into()))?;
    // S is Hermitian, so U = ρ X S⁻¹ means Uᴴ = ρ S⁻¹ Xᴴ.
    Ok(chol.solve(&x.adjoint()).adjoint() * c64(rho))
}

/// The bracketed MMSE matrix `ρ Σ_j (ĥ_j ĥ_jᴴ + C_j) + σ² I` built explicitly.
pub fn mmse_system_matrix(hhat: &DMatrix<Complex64>, bank: &EstimatorBank, rho: f64, sigma2: f64) -> DMatrix<Complex64> {
    let n = hhat.nrows();
    let m = bank.antennas_per_ap;
    let mut a = hhat * hhat.adjoint();
    for j in 0..bank.k {
        for l in 0..bank.num_aps {
            let mut blk = a.view_mut((l * m, l * m), (m, m));
            blk += &bank.terms(j, l).c;
        }
    }
    a *= c64(rho);
    a + DMatrix::<Complex64>::identity(n, n) * c64(sigma2)
}

/// Reference MMSE combiners from a dense `N×N` solve.
pub fn mmse_combiners_direct(
    hhat: &DMatrix<Complex64>,
    bank: &EstimatorBank,
    rho: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>> {
    let a = mmse_system_matrix(hhat, bank, rho, sigma2);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("MMSE system is not positive definite".into()))?;
    Ok(chol.solve(hhat) * c64(rho))
}

/// Cross gains `G[i, j] = u_iᴴ h_j`.
pub fn cross_gains(u: &DMatrix<Complex64>, h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    u.adjoint() * h
}

fn point(g: Complex64, ghat: Complex64, sigma2: f64, link: &LinkParams) -> Result<ScalarChannelPoint> {
    ScalarChannelPoint::new(g, ghat, sigma2, link.rho, link.n, link.log_m1)
        .map_err(|e| Error::Numerical(format!("degenerate effective channel: {e}")))
}

/// Uplink scalar channel of UE `i`: `g = u_iᴴh_i`, `ĝ = u_iᴴĥ_i`, and the
/// interference from the other UEs plus combined noise as effective noise.
pub fn ul_effective_channel(
    i: usize,
    u: &DMatrix<Complex64>,
    draw: &FadingDraw,
    link: &LinkParams,
) -> Result<ScalarChannelPoint> {
    let ui = u.column(i);
    let g = ui.dotc(&draw.h.column(i));
    let ghat = ui.dotc(&draw.hhat.column(i));
    let interference: f64 = (0..draw.h.ncols())
        .filter(|&j| j != i)
        .map(|j| ui.dotc(&draw.h.column(j)).norm_sqr())
        .sum();
    point(g, ghat, link.rho * interference + link.sigma2 * ui.norm_squared(), link)
}

pub fn ul_effective_channels(
    u: &DMatrix<Complex64>,
    draw: &FadingDraw,
    link: &LinkParams,
) -> Result<Vec<ScalarChannelPoint>> {
    let gains = cross_gains(u, &draw.h);
    let k = gains.nrows();
    (0..k)
        .map(|i| {
            let ui = u.column(i);
            let ghat = ui.dotc(&draw.hhat.column(i));
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| gains[(i, j)].norm_sqr()).sum();
            point(
                gains[(i, i)],
                ghat,
                link.rho * interference + link.sigma2 * ui.norm_squared(),
                link,
            )
        })
        .collect()
}

/// Per-UE moments from the statistics pass, each with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct HardeningStats {
    pub samples: usize,
    pub norm2_u: Vec<f64>,
    pub norm2_u_se: Vec<f64>,
    /// `E[h_iᴴ w̄_i]`, the gain the DL decoder assumes.
    pub g_dl: Vec<Complex64>,
    pub g_dl_se: Vec<f64>,
}

/// Per-realization quantities feeding [`HardeningStats`].
#[derive(Debug, Clone, PartialEq)]
pub struct HardeningSample {
    pub norm2_u: Vec<f64>,
    /// `h_iᴴ u_i` (duality) or `h_iᴴ u_i / ‖u_i‖` (per-realization norm).
    pub gain: Vec<Complex64>,
}

pub fn hardening_sample(u: &DMatrix<Complex64>, h: &DMatrix<Complex64>, per_realization_norm: bool) -> HardeningSample {
    let k = u.ncols();
    let mut norm2_u = Vec::with_capacity(k);
    let mut gain = Vec::with_capacity(k);
    for i in 0..k {
        let n2 = u.column(i).norm_squared();
        let mut g = h.column(i).dotc(&u.column(i));
        if per_realization_norm {
            g /= n2.sqrt();
        }
        norm2_u.push(n2);
        gain.push(g);
    }
    HardeningSample { norm2_u, gain }
}

/// Sample means in the given (index) order. With the duality rule the DL gain
/// is `mean(h_iᴴu_i) / √mean(‖u_i‖²)`.
pub fn hardening_stats(samples: &[HardeningSample], per_realization_norm: bool) -> Result<HardeningStats> {
    let n = samples.len();
    if n < MIN_HARDENING_SAMPLES {
        return Err(Error::Config(format!(
            "hardening pass needs at least {MIN_HARDENING_SAMPLES} fades, got {n}"
        )));
    }
    let k = samples[0].norm2_u.len();
    let nf = n as f64;
    let mut stats = HardeningStats {
        samples: n,
        norm2_u: vec![0.0; k],
        norm2_u_se: vec![0.0; k],
        g_dl: vec![Complex64::new(0.0, 0.0); k],
        g_dl_se: vec![0.0; k],
    };
    for i in 0..k {
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut g1, mut g2) = (Complex64::new(0.0, 0.0), 0.0);
        for smp in samples {
            s1 += smp.norm2_u[i];
            s2 += smp.norm2_u[i] * smp.norm2_u[i];
            g1 += smp.gain[i];
            g2 += smp.gain[i].norm_sqr();
        }
        let mean_n = s1 / nf;
        let mean_g = g1 / nf;
        let var_n = ((s2 / nf - mean_n * mean_n) * nf / (nf - 1.0)).max(0.0);
        let var_g = ((g2 / nf - mean_g.norm_sqr()) * nf / (nf - 1.0)).max(0.0);
        if !(mean_n > 0.0 && mean_n.is_finite()) {
            return Err(Error::Numerical(format!("UE {i}: mean combiner power is {mean_n}")));
        }
        let scale = if per_realization_norm { 1.0 } else { mean_n.sqrt() };
        stats.norm2_u[i] = mean_n;
        stats.norm2_u_se[i] = (var_n / nf).sqrt();
        stats.g_dl[i] = mean_g / scale;
        stats.g_dl_se[i] = (var_g / nf).sqrt() / scale;
    }
    Ok(stats)
}

/// Duality precoders `w̄_i = u_i / √E‖u_i‖²`, or `u_i/‖u_i‖` per realization.
pub fn compute_precoders(
    u: &DMatrix<Complex64>,
    stats: &HardeningStats,
    per_realization_norm: bool,
) -> Result<DMatrix<Complex64>> {
    let mut w = u.clone();
    for i in 0..u.ncols() {
        let norm2 = if per_realization_norm {
            u.column(i).norm_squared()
        } else {
            stats.norm2_u[i]
        };
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::Numerical(format!("UE {i}: precoder normalization {norm2}")));
        }
        w.column_mut(i).scale_mut(1.0 / norm2.sqrt());
    }
    Ok(w)
}

/// Downlink scalar channel of every UE: `g = h_iᴴw̄_i`, decoded with the
/// fading-independent `ĝ` from the statistics pass.
pub fn dl_effective_channels(
    h: &DMatrix<Complex64>,
    w: &DMatrix<Complex64>,
    stats: &HardeningStats,
    link: &LinkParams,
) -> Result<Vec<ScalarChannelPoint>> {
    let t = h.adjoint() * w;
    let k = t.nrows();
    (0..k)
        .map(|i| {
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| t[(i, j)].norm_sqr()).sum();
            point(t[(i, i)], stats.g_dl[i], link.rho * interference + link.sigma2, link)
        })
        .collect()
}
