//! Simulation configuration. Powers are given in dBm here and converted to
//! linear milliwatts once, in [`SimConfig::powers`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AreaSpec, Mode};
use crate::processing::Scheme;

/// How the metric parameter `s` of the bound is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SMode {
    /// Optimize `s` for every fading realization.
    PerRealization,
    /// One `s` per UE, picked on the coarse grid to minimize the fading-averaged ε.
    PerUe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub area: AreaSpec,
    pub mode: Mode,
    pub scheme: Scheme,
    /// Number of APs (cell-free/small-cell); antennas = `l * m` for cellular.
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub np: usize,
    pub n: usize,
    pub n_ul: usize,
    pub n_dl: usize,
    pub payload_bits: u32,
    pub rho_ul_dbm: f64,
    pub rho_dl_dbm: f64,
    pub sigma2_ul_dbm: f64,
    pub sigma2_dl_dbm: f64,
    pub delta_deg: f64,
    pub eps_target: f64,
    pub n_placements: usize,
    pub n_fading: usize,
    pub n_stat: usize,
    pub master_seed: u64,
    pub s_mode: SMode,
    /// Nominal angle per (UE, AP) pair; `false` uses one angle per UE (towards its strongest AP).
    pub angle_per_pair: bool,
    /// Unit-norm precoders in every realization; `false` normalizes by the
    /// average power instead (`u / √E‖u‖²`).
    pub per_realization_norm: bool,
    pub quad_nodes: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area: AreaSpec::default(),
            mode: Mode::CellFree,
            scheme: Scheme::Mmse,
            l: 100,
            m: 1,
            k: 40,
            np: 40,
            n: 300,
            n_ul: 130,
            n_dl: 130,
            payload_bits: 160,
            rho_ul_dbm: -10.0,
            rho_dl_dbm: -10.0,
            sigma2_ul_dbm: -96.0,
            sigma2_dl_dbm: -96.0,
            delta_deg: 25.0,
            eps_target: 1e-5,
            n_placements: 100,
            n_fading: 300,
            n_stat: 500,
            master_seed: 1,
            s_mode: SMode::PerRealization,
            angle_per_pair: true,
            per_realization_norm: true,
            quad_nodes: 200,
        }
    }
}

/// Linear-scale powers in milliwatts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Powers {
    pub rho_ul: f64,
    pub rho_dl: f64,
    pub sigma2_ul: f64,
    pub sigma2_dl: f64,
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SimConfig {
    /// Scaled-down scenario: 75 m × 75 m, 8 UEs with 8 orthogonal pilots.
    pub fn desk_scale() -> Self {
        Self {
            area: AreaSpec {
                side_length: 75.0,
                ..AreaSpec::default()
            },
            k: 8,
            np: 8,
            n: 268,
            n_ul: 130,
            n_dl: 130,
            n_placements: 50,
            n_fading: 200,
            ..Self::default()
        }
    }

    pub fn powers(&self) -> Powers {
        Powers {
            rho_ul: dbm_to_mw(self.rho_ul_dbm),
            rho_dl: dbm_to_mw(self.rho_dl_dbm),
            sigma2_ul: dbm_to_mw(self.sigma2_ul_dbm),
            sigma2_dl: dbm_to_mw(self.sigma2_dl_dbm),
        }
    }

    pub fn delta_rad(&self) -> f64 {
        self.delta_deg.to_radians()
    }

    /// Total antennas in the network.
    pub fn total_antennas(&self) -> usize {
        self.l * self.m
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.area.validate()?;
        if self.l == 0 || self.m == 0 || self.k == 0 {
            return fail(format!(
                "L, M and K must be at least 1 (got L={}, M={}, K={})",
                self.l, self.m, self.k
            ));
        }
        if self.np < self.k {
            return Err(Error::Unsupported(format!(
                "pilot length {} is shorter than K = {}; pilot contamination is not modeled",
                self.np, self.k
            )));
        }
        if self.n != self.np + self.n_ul + self.n_dl {
            return fail(format!(
                "frame length n = {} must equal np + n_ul + n_dl = {}",
                self.n,
                self.np + self.n_ul + self.n_dl
            ));
        }
        if self.n_ul == 0 || self.n_dl == 0 {
            return fail("n_ul and n_dl must be positive".into());
        }
        for (name, v) in [
            ("rho_ul_dbm", self.rho_ul_dbm),
            ("rho_dl_dbm", self.rho_dl_dbm),
            ("sigma2_ul_dbm", self.sigma2_ul_dbm),
            ("sigma2_dl_dbm", self.sigma2_dl_dbm),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        if !(self.delta_deg > 0.0 && self.delta_deg <= 180.0) {
            return fail(format!("angular spread must be in (0, 180] degrees, got {}", self.delta_deg));
        }
        if !(0.0..=1.0).contains(&self.eps_target) {
            return fail(format!("eps_target must be in [0, 1], got {}", self.eps_target));
        }
        if self.n_placements == 0 || self.n_fading == 0 {
            return fail("n_placements and n_fading must be at least 1".into());
        }
        if self.n_stat < crate::processing::MIN_HARDENING_SAMPLES {
            return fail(format!(
                "n_stat = {} is below the minimum of {}",
                self.n_stat,
                crate::processing::MIN_HARDENING_SAMPLES
            ));
        }
        if self.quad_nodes < 2 {
            return fail("quad_nodes must be at least 2".into());
        }
        if self.mode != Mode::Cellular {
            crate::geometry::grid_shape(self.l)?;
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}
