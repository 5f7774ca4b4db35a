//! Deployments on a square area with optional wrap-around (torus) distances.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Largest column/row ratio accepted for the AP grid.
pub const MAX_GRID_ASPECT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaSpec {
    pub side_length: f64,
    pub ap_height: f64,
    pub wrap_around: bool,
}

impl Default for AreaSpec {
    fn default() -> Self {
        Self {
            side_length: 150.0,
            ap_height: 10.0,
            wrap_around: true,
        }
    }
}

impl AreaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::Config(format!(
                "side_length must be positive, got {}",
                self.side_length
            )));
        }
        if !(self.ap_height >= 0.0 && self.ap_height.is_finite()) {
            return Err(Error::Config(format!(
                "ap_height must be nonnegative, got {}",
                self.ap_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All APs jointly serve every UE through the CPU.
    #[serde(alias = "cell-free")]
    CellFree,
    /// One AP in the middle of the area with all `L·M` antennas.
    Cellular,
    /// Each UE is served by its strongest AP only.
    #[serde(alias = "small-cell")]
    SmallCell,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::CellFree => "cellfree",
            Mode::Cellular => "cellular",
            Mode::SmallCell => "smallcell",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cellfree" => Ok(Mode::CellFree),
            "cellular" => Ok(Mode::Cellular),
            "smallcell" => Ok(Mode::SmallCell),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub mode: Mode,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Configured AP count; for cellular this only sets the antenna total.
    pub l: usize,
    pub m: usize,
    pub k: usize,
}

impl Deployment {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    /// Antennas at each physical AP.
    pub fn antennas_per_ap(&self) -> usize {
        match self.mode {
            Mode::Cellular => self.l * self.m,
            _ => self.m,
        }
    }

    pub fn total_antennas(&self) -> usize {
        self.num_aps() * self.antennas_per_ap()
    }
}

/// Rows and columns of the AP grid: `r` is the largest divisor of `l` not
/// exceeding `√l`.
pub fn grid_shape(l: usize) -> Result<(usize, usize)> {
    if l == 0 {
        return Err(Error::Config("at least one AP is required".into()));
    }
    let r = (1..=l)
        .take_while(|r| r * r <= l)
        .filter(|r| l % r == 0)
        .last()
        .unwrap_or(1);
    let c = l / r;
    if c as f64 / r as f64 > MAX_GRID_ASPECT {
        return Err(Error::Config(format!(
            "L = {l} only factors as a {r}x{c} grid (aspect ratio {:.1} > {MAX_GRID_ASPECT}); choose an L with a near-square factorization",
            c as f64 / r as f64
        )));
    }
    Ok((r, c))
}

/// AP positions at the centers of the cells of an `r×c` grid.
pub fn grid_positions(l: usize, side: f64) -> Result<Vec<[f64; 2]>> {
    let (r, c) = grid_shape(l)?;
    let (dx, dy) = (side / c as f64, side / r as f64);
    let mut out = Vec::with_capacity(l);
    for row in 0..r {
        for col in 0..c {
            out.push([(col as f64 + 0.5) * dx, (row as f64 + 0.5) * dy]);
        }
    }
    Ok(out)
}

pub fn build_deployment<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Deployment> {
    if cfg.l == 0 || cfg.m == 0 || cfg.k == 0 {
        return Err(Error::Config("L, M and K must be at least 1".into()));
    }
    let side = cfg.area.side_length;
    let ap_positions = match cfg.mode {
        Mode::Cellular => vec![[0.5 * side, 0.5 * side]],
        Mode::CellFree | Mode::SmallCell => grid_positions(cfg.l, side)?,
    };
    let ue_positions = (0..cfg.k)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect();
    Ok(Deployment {
        mode: cfg.mode,
        ap_positions,
        ue_positions,
        l: cfg.l,
        m: cfg.m,
        k: cfg.k,
    })
}

/// K×(number of APs) tables of 3-D distances and azimuths.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryTable {
    pub distance: DMatrix<f64>,
    pub azimuth: DMatrix<f64>,
}

/// Displacement from `from` to `to`, taking the shortest wrap-around image
/// when `wrap` is set.
pub fn displacement(from: [f64; 2], to: [f64; 2], side: f64, wrap: bool) -> [f64; 2] {
    let direct = [to[0] - from[0], to[1] - from[1]];
    if !wrap {
        return direct;
    }
    let mut best = direct;
    let mut best_norm = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let d = [direct[0] + sx * side, direct[1] + sy * side];
            let norm = d[0] * d[0] + d[1] * d[1];
            if norm < best_norm {
                best_norm = norm;
                best = d;
            }
        }
    }
    best
}

/// Azimuth in `(−π, π]`.
pub fn azimuth(d: [f64; 2]) -> f64 {
    let phi = d[1].atan2(d[0]);
    if phi <= -PI {
        PI
    } else {
        phi
    }
}

pub fn pairwise_geometry(deployment: &Deployment, area: &AreaSpec) -> GeometryTable {
    let k = deployment.ue_positions.len();
    let l = deployment.ap_positions.len();
    let mut distance = DMatrix::zeros(k, l);
    let mut az = DMatrix::zeros(k, l);
    for (i, &ue) in deployment.ue_positions.iter().enumerate() {
        for (j, &ap) in deployment.ap_positions.iter().enumerate() {
            let d = displacement(ap, ue, area.side_length, area.wrap_around);
            let d2 = d[0] * d[0] + d[1] * d[1];
            distance[(i, j)] = (d2 + area.ap_height * area.ap_height).sqrt();
            az[(i, j)] = azimuth(d);
        }
    }
    GeometryTable {
        distance,
        azimuth: az,
    }
}
