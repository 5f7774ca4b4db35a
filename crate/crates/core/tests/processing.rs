//! Combining and precoding statistics on simulated networks.

use cfmimo::processing::{compute_precoders, Scheme};
use cfmimo::sim::Network;
use cfmimo::{Mode, SimConfig};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn desk(l: usize, scheme: Scheme) -> SimConfig {
    SimConfig {
        l,
        scheme,
        mode: Mode::CellFree,
        ..SimConfig::desk_scale()
    }
}

#[test]
fn average_precoder_power_is_one() {
    for scheme in [Scheme::Mr, Scheme::Mmse] {
        let cfg = desk(9, scheme);
        let net = Network::build(&cfg, 0).unwrap();
        let stats = net.hardening(cfg.master_seed, 0, 20000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let draws = 20000;
        let k = net.k();
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k];
        for _ in 0..draws {
            let d = net.draw(&mut rng).unwrap();
            let u = net.processor.combiners(&d.hhat).unwrap();
            let w = compute_precoders(&u, &stats, false).unwrap();
            for i in 0..k {
                let p = w.column(i).norm_squared();
                s1[i] += p;
                s2[i] += p * p;
            }
        }
        let n = draws as f64;
        for i in 0..k {
            let mean = s1[i] / n;
            let se_draws = ((s2[i] / n - mean * mean) / n).sqrt();
            // The normalizer is itself an estimate; its error enters as a ratio.
            let se_norm = stats.norm2_u_se[i] / stats.norm2_u[i];
            let se = (se_draws * se_draws + se_norm * se_norm).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "{scheme} UE {i}: {mean} (se {se})");
        }
    }
}

#[test]
fn mr_effective_downlink_gain_is_real_and_positive() {
    let cfg = desk(16, Scheme::Mr);
    let net = Network::build(&cfg, 2).unwrap();
    let stats = net.hardening(cfg.master_seed, 2, 4000).unwrap();
    for (i, g) in stats.g_dl.iter().enumerate() {
        let se = stats.g_dl_se[i];
        assert!(g.re > 5.0 * se, "UE {i}: {g} (se {se})");
        assert!(g.im.abs() < 3.0 * se, "UE {i}: {g} (se {se})");
    }
}

/// Mean over UEs of `Var[h_iᴴw̄_i] / |E[h_iᴴw̄_i]|²`.
fn hardening_ratio(cfg: &SimConfig, placements: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for p in 0..placements {
        let net = Network::build(cfg, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + p as u64);
        let k = net.k();
        let draws = 800;
        let mut g1 = vec![Complex64::new(0.0, 0.0); k];
        let mut g2 = vec![0.0; k];
        for _ in 0..draws {
            let d = net.draw(&mut rng).unwrap();
            let u = net.processor.combiners(&d.hhat).unwrap();
            for i in 0..k {
                let g = d.h.column(i).dotc(&u.column(i));
                g1[i] += g;
                g2[i] += g.norm_sqr();
            }
        }
        let n = draws as f64;
        for i in 0..k {
            let mean = g1[i] / n;
            total += (g2[i] / n - mean.norm_sqr()) / mean.norm_sqr();
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn channel_hardens_as_the_network_densifies() {
    let ratios: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&l| hardening_ratio(&SimConfig { m: 1, ..desk(l, Scheme::Mr) }, 6))
        .collect();
    eprintln!("hardening ratios {ratios:?}");
    assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
}
