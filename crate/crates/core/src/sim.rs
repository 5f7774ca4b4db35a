//! Placements, fading passes, per-UE error probabilities and availability.

use cfmimo_fbl::tail::log_add_exp;
use cfmimo_fbl::{epsilon_saddlepoint, log_m_minus_1, optimize_s, ScalarChannelPoint, S_GRID_EXPONENTS};
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{local_scattering_corr, nodes_for, pathloss_linear, ChannelModel, GaussLegendre};
use crate::config::{SMode, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_deployment, pairwise_geometry, Deployment, GeometryTable, Mode};
use crate::pilot::{EstimatorBank, FadingDraw, PilotConfig};
use crate::processing::{
    compute_precoders, dl_effective_channels, hardening_sample, hardening_stats, ul_effective_channels,
    HardeningStats, LinkParams, Processor, Scheme,
};
use crate::report::{wilson_interval, Interval};
use crate::seed::{placement_seed, stream_rng, Stream};

/// Everything about one placement that does not change with the fading.
#[derive(Debug, Clone)]
pub struct Network {
    pub deployment: Deployment,
    pub geometry: GeometryTable,
    pub model: ChannelModel,
    pub bank: EstimatorBank,
    pub processor: Processor,
    pub ul: LinkParams,
    pub dl: LinkParams,
    pub per_realization_norm: bool,
}

impl Network {
    /// Builds placement `placement`; UE positions depend only on the master
    /// seed and the placement index.
    pub fn build(cfg: &SimConfig, placement: usize) -> Result<Self> {
        let mut rng = stream_rng(cfg.master_seed, placement, Stream::UePositions, 0);
        let deployment = build_deployment(cfg, &mut rng)?;
        Self::from_deployment(cfg, deployment)
    }

    pub fn from_deployment(cfg: &SimConfig, deployment: Deployment) -> Result<Self> {
        cfg.validate()?;
        let geometry = pairwise_geometry(&deployment, &cfg.area);
        let (k, num_aps, m) = (deployment.k, deployment.num_aps(), deployment.antennas_per_ap());
        let delta = cfg.delta_rad();
        let rule = GaussLegendre::new(nodes_for(m, delta, cfg.quad_nodes));
        let mut betas = vec![0.0; k * num_aps];
        for i in 0..k {
            for l in 0..num_aps {
                betas[i * num_aps + l] = pathloss_linear(geometry.distance[(i, l)])?;
            }
        }
        let mut corrs = Vec::with_capacity(k * num_aps);
        for i in 0..k {
            let row = &betas[i * num_aps..(i + 1) * num_aps];
            let strongest = (0..num_aps).fold(0, |b, l| if row[l] > row[b] { l } else { b });
            for (l, &beta) in row.iter().enumerate() {
                let phi = if cfg.angle_per_pair {
                    geometry.azimuth[(i, l)]
                } else {
                    geometry.azimuth[(i, strongest)]
                };
                corrs.push(local_scattering_corr(beta, phi, delta, m, &rule));
            }
        }
        let model = ChannelModel::new(k, num_aps, corrs)?;
        let p = cfg.powers();
        let bank = EstimatorBank::new(&model, PilotConfig::orthogonal(k, cfg.np, p.rho_ul, p.sigma2_ul))?;
        let processor = Processor::new(cfg.mode, cfg.scheme, &model, &bank)?;
        let log_m1 = log_m_minus_1(cfg.payload_bits);
        Ok(Self {
            deployment,
            geometry,
            model,
            bank,
            processor,
            ul: LinkParams {
                rho: p.rho_ul,
                sigma2: p.sigma2_ul,
                n: cfg.n_ul,
                log_m1,
            },
            dl: LinkParams {
                rho: p.rho_dl,
                sigma2: p.sigma2_dl,
                n: cfg.n_dl,
                log_m1,
            },
            per_realization_norm: cfg.per_realization_norm,
        })
    }

    pub fn k(&self) -> usize {
        self.model.k
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FadingDraw> {
        self.bank.draw(&self.model, rng)
    }

    /// Statistics pass over `n_stat` fades drawn from their own stream.
    pub fn hardening(&self, master: u64, placement: usize, n_stat: usize) -> Result<HardeningStats> {
        let samples = (0..n_stat)
            .into_par_iter()
            .map(|f| {
                let mut rng = stream_rng(master, placement, Stream::HardeningPass, f);
                let draw = self.draw(&mut rng)?;
                let u = self.processor.combiners(&draw.hhat)?;
                Ok(hardening_sample(&u, &draw.h, self.per_realization_norm))
            })
            .collect::<Result<Vec<_>>>()?;
        hardening_stats(&samples, self.per_realization_norm)
    }

    /// UL and DL scalar channels of every UE for one realization.
    pub fn link_points(
        &self,
        draw: &FadingDraw,
        stats: &HardeningStats,
    ) -> Result<(Vec<ScalarChannelPoint>, Vec<ScalarChannelPoint>)> {
        let u = self.processor.combiners(&draw.hhat)?;
        let ul = ul_effective_channels(&u, draw, &self.ul)?;
        let w = compute_precoders(&u, stats, self.per_realization_norm)?;
        let dl = dl_effective_channels(&draw.h, &w, stats, &self.dl)?;
        Ok((ul, dl))
    }
}

/// Error-probability summary of one UE in one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct UeResult {
    pub eps_ul: f64,
    pub eps_ul_se: f64,
    pub eps_dl: f64,
    pub eps_dl_se: f64,
    /// Mean of `log2(s·σ̃²)` of the chosen metric parameters.
    pub s_ul_log2: f64,
    pub s_dl_log2: f64,
    /// Difference between the two halves of the fading pass in pooled standard errors.
    pub half_z_ul: f64,
    pub half_z_dl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub placement: usize,
    pub seed: u64,
    pub ues: Vec<UeResult>,
}

/// Conditional error probability and the scale-free `log2(s·σ̃²)` used.
fn conditional_eps(points: &[ScalarChannelPoint]) -> Vec<(f64, f64)> {
    points
        .iter()
        .map(|p| {
            let (s, est) = optimize_s(p);
            (est.value, (s * p.metric_noise()).log2())
        })
        .collect()
}

/// Log of the fading-averaged saddlepoint estimate at one absolute `s`.
fn log_mean_eps_at(points: &[&ScalarChannelPoint], s: f64) -> f64 {
    let lse = points
        .iter()
        .fold(f64::NEG_INFINITY, |acc, p| log_add_exp(acc, epsilon_saddlepoint(p, s).log_value));
    lse - (points.len() as f64).ln()
}

/// One `s` per UE: grid over `2^j / mean σ̃²`, then golden-section refinement
/// of the fading-averaged estimate.
fn per_ue_s(points: &[&ScalarChannelPoint]) -> f64 {
    let mean_sigma2 = points.iter().map(|p| p.metric_noise()).sum::<f64>() / points.len() as f64;
    let f = |j: f64| log_mean_eps_at(points, j.exp2() / mean_sigma2);
    let (mut best_j, mut best) = (0.0, f64::INFINITY);
    for j in S_GRID_EXPONENTS {
        let v = f(j as f64);
        if v < best {
            best = v;
            best_j = j as f64;
        }
    }
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (
        (best_j - 1.0).max(*S_GRID_EXPONENTS.start() as f64),
        (best_j + 1.0).min(*S_GRID_EXPONENTS.end() as f64),
    );
    let (mut x1, mut x2) = (b - ratio * (b - a), a + ratio * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..20 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best {
            best = v;
            best_j = x;
        }
    }
    best_j.exp2() / mean_sigma2
}

fn fixed_s_eps(points: &[&ScalarChannelPoint], s: f64) -> Vec<(f64, f64)> {
    points
        .iter()
        .map(|p| (epsilon_saddlepoint(p, s).value, (s * p.metric_noise()).log2()))
        .collect()
}

/// Mean, standard error and half-split z-score of a sequence.
fn summarize(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    // Normalize first: squares of probabilities near 1e-170 underflow.
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 || n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().map(|x| x / scale).sum::<f64>() / v.len() as f64;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x / scale - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        } else {
            0.0
        };
        (m * scale, (var / v.len() as f64).sqrt() * scale)
    };
    let (mean, se) = stats(xs);
    let z = if n >= 4 {
        let (m1, s1) = stats(&xs[..n / 2]);
        let (m2, s2) = stats(&xs[n / 2..]);
        let pooled = (s1 * s1 + s2 * s2).sqrt();
        if pooled > 0.0 {
            (m1 - m2).abs() / pooled
        } else if m1 == m2 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    (mean.clamp(0.0, 1.0), se, z)
}

/// Stats pass, then evaluation pass, for one placement.
pub fn run_placement(cfg: &SimConfig, placement: usize) -> Result<PlacementResult> {
    let wrap = |e: Error, fade: Option<usize>| e.in_placement(placement, fade);
    let net = Network::build(cfg, placement).map_err(|e| wrap(e, None))?;
    let stats = net
        .hardening(cfg.master_seed, placement, cfg.n_stat)
        .map_err(|e| wrap(e, None))?;

    let per_fade = (0..cfg.n_fading)
        .into_par_iter()
        .map(|f| {
            let mut rng = stream_rng(cfg.master_seed, placement, Stream::EvaluationPass, f);
            let draw = net.draw(&mut rng).map_err(|e| wrap(e, Some(f)))?;
            net.link_points(&draw, &stats).map_err(|e| wrap(e, Some(f)))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = net.k();
    let ues = (0..k)
        .into_par_iter()
        .map(|i| {
            let ul: Vec<&ScalarChannelPoint> = per_fade.iter().map(|(u, _)| &u[i]).collect();
            let dl: Vec<&ScalarChannelPoint> = per_fade.iter().map(|(_, d)| &d[i]).collect();
            let eval = |pts: &[&ScalarChannelPoint]| match cfg.s_mode {
                SMode::PerRealization => conditional_eps(&pts.iter().map(|p| **p).collect::<Vec<_>>()),
                SMode::PerUe => fixed_s_eps(pts, per_ue_s(pts)),
            };
            let (eu, ed) = (eval(&ul), eval(&dl));
            let split = |v: &[(f64, f64)]| {
                let eps: Vec<f64> = v.iter().map(|x| x.0).collect();
                let s_mean = v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64;
                (summarize(&eps), s_mean)
            };
            let ((eps_ul, eps_ul_se, half_z_ul), s_ul_log2) = split(&eu);
            let ((eps_dl, eps_dl_se, half_z_dl), s_dl_log2) = split(&ed);
            UeResult {
                eps_ul,
                eps_ul_se,
                eps_dl,
                eps_dl_se,
                s_ul_log2,
                s_dl_log2,
                half_z_ul,
                half_z_dl,
            }
        })
        .collect();
    Ok(PlacementResult {
        placement,
        seed: placement_seed(cfg.master_seed, placement),
        ues,
    })
}

/// Largest half-split z-score and the share of per-UE estimates above 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub max_half_z: f64,
    pub frac_above_3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityResult {
    pub eta_ul: f64,
    pub eta_ul_ci: Interval,
    pub eta_dl: f64,
    pub eta_dl_ci: Interval,
    pub samples: usize,
    pub eps_target: f64,
    pub eps_ul: Vec<f64>,
    pub eps_dl: Vec<f64>,
    pub placements: Vec<PlacementResult>,
    pub convergence: Convergence,
}

/// Fraction of samples at or below the target.
pub fn availability(eps: &[f64], target: f64) -> f64 {
    if eps.is_empty() {
        return 0.0;
    }
    eps.iter().filter(|&&e| e <= target).count() as f64 / eps.len() as f64
}

pub fn aggregate(cfg: &SimConfig, placements: Vec<PlacementResult>) -> AvailabilityResult {
    let eps_ul: Vec<f64> = placements.iter().flat_map(|p| p.ues.iter().map(|u| u.eps_ul)).collect();
    let eps_dl: Vec<f64> = placements.iter().flat_map(|p| p.ues.iter().map(|u| u.eps_dl)).collect();
    let n = eps_ul.len();
    let hits = |v: &[f64]| v.iter().filter(|&&e| e <= cfg.eps_target).count();
    let zs: Vec<f64> = placements
        .iter()
        .flat_map(|p| p.ues.iter().flat_map(|u| [u.half_z_ul, u.half_z_dl]))
        .collect();
    let convergence = Convergence {
        max_half_z: zs.iter().cloned().fold(0.0, f64::max),
        frac_above_3: if zs.is_empty() {
            0.0
        } else {
            zs.iter().filter(|&&z| z > 3.0).count() as f64 / zs.len() as f64
        },
    };
    AvailabilityResult {
        eta_ul: availability(&eps_ul, cfg.eps_target),
        eta_ul_ci: wilson_interval(hits(&eps_ul), n),
        eta_dl: availability(&eps_dl, cfg.eps_target),
        eta_dl_ci: wilson_interval(hits(&eps_dl), n),
        samples: n,
        eps_target: cfg.eps_target,
        eps_ul,
        eps_dl,
        placements,
        convergence,
    }
}

/// Every placement, pooled. Placements run in parallel; results are
/// gathered by index so the outcome does not depend on the worker count.
pub fn network_availability(cfg: &SimConfig) -> Result<AvailabilityResult> {
    cfg.validate()?;
    let placements = (0..cfg.n_placements)
        .into_par_iter()
        .map(|p| run_placement(cfg, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, placements))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub l: usize,
    pub m: usize,
    pub mode: Mode,
    pub scheme: Scheme,
}

impl GridPoint {
    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            l: self.l,
            m: self.m,
            mode: self.mode,
            scheme: self.scheme,
            ..base.clone()
        }
    }

    pub fn total_antennas(&self) -> usize {
        self.l * self.m
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub point: GridPoint,
    pub result: Result<AvailabilityResult>,
}

/// One availability run per grid point with the common master seed, so every
/// point sees the same UE drops. Failures stay in their row.
pub fn sweep(base: &SimConfig, grid: &[GridPoint]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    Ok(grid
        .iter()
        .map(|pt| SweepRow {
            point: *pt,
            result: network_availability(&pt.apply(base)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AreaSpec;

    fn tiny() -> SimConfig {
        SimConfig {
            area: AreaSpec {
                side_length: 60.0,
                ..AreaSpec::default()
            },
            l: 4,
            m: 2,
            k: 3,
            np: 3,
            n: 263,
            n_placements: 3,
            n_fading: 20,
            n_stat: 50,
            quad_nodes: 100,
            ..SimConfig::default()
        }
    }

    #[test]
    fn summarize_statistics() {
        let (m, se, z) = summarize(&[0.1, 0.3, 0.1, 0.3]);
        assert!((m - 0.2).abs() < 1e-15);
        assert!((se - (0.04f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(z, 0.0);
        let (_, _, z) = summarize(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(z, f64::INFINITY);
        let tiny: Vec<f64> = [1.0, 3.0, 1.0, 3.0].iter().map(|x| x * 1e-170).collect();
        let (m, se, z) = summarize(&tiny);
        assert!((m / 2e-170 - 1.0).abs() < 1e-12 && se > 0.0 && z == 0.0);
    }

    #[test]
    fn availability_edges() {
        let eps = [1e-7, 2e-5, 0.5, 1e-30];
        assert_eq!(availability(&eps, 1.0), 1.0);
        assert_eq!(availability(&eps, 0.0), 0.0);
        assert_eq!(availability(&eps, 1e-5), 0.5);
    }

    #[test]
    fn target_does_not_change_error_probabilities() {
        let cfg = tiny();
        let a = run_placement(&cfg, 1).unwrap();
        let b = run_placement(
            &SimConfig {
                eps_target: 0.3,
                ..cfg
            },
            1,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn result_independent_of_worker_count() {
        let cfg = tiny();
        let run = |workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| network_availability(&cfg).unwrap())
        };
        let (one, four) = (run(1), run(4));
        assert_eq!(one.eps_ul, four.eps_ul);
        assert_eq!(one.eps_dl, four.eps_dl);
        assert_eq!(one.placements, four.placements);
    }

    #[test]
    fn cellular_equals_single_cell_free_ap() {
        let cfg = SimConfig {
            l: 4,
            m: 2,
            ..tiny()
        };
        let cellular = SimConfig {
            mode: Mode::Cellular,
            ..cfg.clone()
        };
        let merged = SimConfig {
            mode: Mode::CellFree,
            l: 1,
            m: 8,
            ..cfg
        };
        for p in 0..2 {
            assert_eq!(run_placement(&cellular, p).unwrap(), run_placement(&merged, p).unwrap());
        }
    }

    #[test]
    fn per_ue_mode_runs_and_bounds_hold() {
        let cfg = SimConfig {
            s_mode: SMode::PerUe,
            ..tiny()
        };
        let r = run_placement(&cfg, 0).unwrap();
        for u in &r.ues {
            assert!((0.0..=1.0).contains(&u.eps_ul) && (0.0..=1.0).contains(&u.eps_dl));
        }
        // Per-realization optimization can only do better than one s per UE.
        let best = run_placement(&tiny(), 0).unwrap();
        for (a, b) in best.ues.iter().zip(&r.ues) {
            assert!(a.eps_ul <= b.eps_ul * (1.0 + 1e-6) + 1e-300);
            assert!(a.eps_dl <= b.eps_dl * (1.0 + 1e-6) + 1e-300);
        }
    }

    #[test]
    fn errors_carry_the_placement() {
        let mut cfg = tiny();
        cfg.n_stat = 10;
        let err = run_placement(&cfg, 2).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("placement 2"));
    }
}
