//! End-to-end placement runs.

use cfmimo::sim::{network_availability, run_placement};
use cfmimo::{Mode, Scheme, SimConfig};

fn single_user_at_high_power() -> SimConfig {
    SimConfig {
        l: 16,
        k: 1,
        rho_ul_dbm: 40.0,
        rho_dl_dbm: 40.0,
        n_placements: 3,
        n_fading: 60,
        n_stat: 100,
        mode: Mode::CellFree,
        scheme: Scheme::Mmse,
        ..SimConfig::desk_scale()
    }
}

// A lone UE's MMSE combiner inverts its channel, so with average-power
// normalization the downlink gain is nearly deterministic.
#[test]
fn single_user_at_high_power_is_essentially_error_free() {
    let cfg = SimConfig {
        per_realization_norm: false,
        ..single_user_at_high_power()
    };
    for p in 0..cfg.n_placements {
        let r = run_placement(&cfg, p).unwrap();
        for ue in &r.ues {
            assert!(ue.eps_ul < 1e-9 && ue.eps_dl < 1e-9, "placement {p}: {ue:?}");
        }
    }
}

// Unit-norm precoding keeps the fading of ‖ĥ‖ in the downlink gain while the
// UE decodes with its mean, so extra power buys nothing.
#[test]
fn unit_norm_downlink_has_a_power_independent_floor() {
    let base = SimConfig {
        per_realization_norm: true,
        ..single_user_at_high_power()
    };
    let louder = SimConfig {
        rho_dl_dbm: base.rho_dl_dbm + 20.0,
        ..base.clone()
    };
    for p in 0..base.n_placements {
        let a = run_placement(&base, p).unwrap().ues[0].clone();
        let b = run_placement(&louder, p).unwrap().ues[0].clone();
        assert!(a.eps_ul < 1e-9, "placement {p}: {a:?}");
        assert!(a.eps_dl > 1e-3, "placement {p}: {a:?}");
        assert!((b.eps_dl / a.eps_dl - 1.0).abs() < 0.01, "placement {p}: {a:?} vs {b:?}");
    }
}

#[test]
fn availability_counts_every_ue_of_every_placement() {
    let cfg = SimConfig {
        l: 9,
        n_placements: 3,
        n_fading: 20,
        n_stat: 50,
        ..SimConfig::desk_scale()
    };
    let r = network_availability(&cfg).unwrap();
    assert_eq!(r.samples, cfg.n_placements * cfg.k);
    assert_eq!(r.eps_ul.len(), r.samples);
    assert!(r.eta_ul_ci.lo <= r.eta_ul && r.eta_ul <= r.eta_ul_ci.hi);
    assert!(r.eta_dl_ci.lo <= r.eta_dl && r.eta_dl <= r.eta_dl_ci.hi);
}
