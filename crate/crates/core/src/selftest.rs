//! Quick invariant checks run by the `selftest` subcommand.

use cfmimo_fbl::{
    epsilon_rcus_mc, epsilon_saddlepoint, gen_info_density, quad_decomposition, solve_saddlepoint, Complex64,
    ScalarChannelPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::complex_normal;
use crate::config::SimConfig;
use crate::geometry::displacement;
use crate::pilot::{EstimatorBank, PilotConfig};
use crate::processing::{mmse_combiners_direct, Processor, Scheme};
use crate::sim::{run_placement, Network};
use crate::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn matched_fixture() -> Check {
    let one = Complex64::new(1.0, 0.0);
    let p = ScalarChannelPoint::new(one, one, 1.0, 1.0, 100, 0.0).expect("valid fixture");
    let d = quad_decomposition(1.0, &p);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let err = (d.lambda1 - r).abs() + (d.lambda2 + r).abs() + (d.d - 2f64.ln()).abs();
    check("matched eigen-fixture", err < 1e-14, format!("total deviation {err:.2e}"))
}

fn representation(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = complex_normal(rng);
        let p = ScalarChannelPoint::new(g, g + complex_normal(rng) * 0.3, rng.random_range(0.1..2.0), 1.3, 10, 1.0)
            .expect("valid point");
        let s = rng.random_range(0.1..3.0);
        let d = quad_decomposition(s, &p);
        let (q, z) = (complex_normal(rng), complex_normal(rng));
        let direct = gen_info_density(s, &p, q, g * q + z);
        let form = d.density(q, z);
        worst = worst.max((direct - form).abs() / direct.abs().max(1.0));
    }
    check("quadratic-form representation", worst < 1e-12, format!("max rel error {worst:.2e}"))
}

fn scale_invariance(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let g = complex_normal(rng);
        let p = ScalarChannelPoint::with_payload_bits(g, g * Complex64::new(0.95, 0.03), 0.05, 1.0, 130, 160)
            .expect("valid point");
        let c = complex_normal(rng) * 10f64.powf(rng.random_range(-6.0..6.0));
        let s = rng.random_range(0.2..5.0) / p.sigma2;
        let a = epsilon_saddlepoint(&p, s).log_value;
        let b = epsilon_saddlepoint(&p.scaled(c), s / c.norm_sqr()).log_value;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    check("scale invariance", worst < 1e-10, format!("max rel deviation {worst:.2e}"))
}

fn oracle(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for &(snr_db, n, bits) in &[(10.0, 100, 180u32), (5.0, 300, 300), (15.0, 130, 300)] {
        let g = Complex64::from_polar(1.0, rng.random_range(-3.0..3.0));
        let p = ScalarChannelPoint::with_payload_bits(g, g * 0.97, 1.0, f64::powf(10.0, snr_db / 10.0), n, bits)
            .expect("valid point");
        let s = 1.0;
        let zeta = solve_saddlepoint(p.rate(), &quad_decomposition(s, &p)).unwrap_or(0.0).min(1.0);
        let sp = epsilon_saddlepoint(&p, s);
        let mc = epsilon_rcus_mc(&p, s, 20_000, zeta, rng).expect("valid oracle call");
        let diff = (sp.log_value - mc.log_value).abs();
        let tol = 0.15f64.max(3.0 * mc.rel_stderr.unwrap_or(0.0));
        ok &= diff <= tol;
        worst = worst.max(diff);
    }
    check("saddlepoint vs importance sampling", ok, format!("max |Δ log ε| {worst:.3}"))
}

fn mmse_paths() -> Check {
    let cfg = SimConfig {
        l: 4,
        m: 2,
        k: 4,
        np: 4,
        n: 264,
        ..SimConfig::desk_scale()
    };
    let Ok(net) = Network::build(&cfg, 0) else {
        return check("MMSE Woodbury vs dense solve", false, "network build failed".into());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = cfg.powers();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let Ok(draw) = net.draw(&mut rng) else {
            return check("MMSE Woodbury vs dense solve", false, "draw failed".into());
        };
        let fast = net.processor.combiners(&draw.hhat);
        let slow = mmse_combiners_direct(&draw.hhat, &net.bank, p.rho_ul, p.sigma2_ul);
        match (fast, slow) {
            (Ok(a), Ok(b)) => worst = worst.max((&a - &b).norm() / b.norm()),
            _ => return check("MMSE Woodbury vs dense solve", false, "solver failed".into()),
        }
    }
    check("MMSE Woodbury vs dense solve", worst < 1e-8, format!("max rel difference {worst:.2e}"))
}

fn orthogonality(rng: &mut ChaCha8Rng) -> Check {
    let rule = crate::channel::GaussLegendre::new(200);
    let r = crate::channel::local_scattering_corr(1e-7, 0.4, 25f64.to_radians(), 2, &rule);
    let model = crate::channel::ChannelModel::new(1, 1, vec![r]).expect("valid correlation");
    let Ok(bank) = EstimatorBank::new(&model, PilotConfig::orthogonal(1, 1, 2.5e-6, 2.5e-13)) else {
        return check("MMSE orthogonality principle", false, "estimator failed".into());
    };
    let draws = 20_000;
    let mut sum = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut sum_sq = [[0.0f64; 2]; 2];
    for _ in 0..draws {
        let Ok(d) = bank.draw(&model, rng) else {
            return check("MMSE orthogonality principle", false, "draw failed".into());
        };
        for a in 0..2 {
            for b in 0..2 {
                let x = d.hhat[(a, 0)] * (d.h[(b, 0)] - d.hhat[(b, 0)]).conj();
                sum[a][b] += x;
                sum_sq[a][b] += x.norm_sqr();
            }
        }
    }
    let nf = draws as f64;
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let mean = sum[a][b] / nf;
            let se = ((sum_sq[a][b] / nf - mean.norm_sqr()) / nf).sqrt();
            worst = worst.max(mean.norm() / se);
        }
    }
    check("MMSE orthogonality principle", worst < 5.0, format!("max |E[ĥ h̃ᴴ]| {worst:.2} standard errors"))
}

fn torus(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = [rng.random_range(0.0..150.0), rng.random_range(0.0..150.0)];
        let b = [rng.random_range(0.0..150.0), rng.random_range(0.0..150.0)];
        let n = |d: [f64; 2]| d[0].hypot(d[1]);
        let (ab, ba) = (n(displacement(a, b, 150.0, true)), n(displacement(b, a, 150.0, true)));
        worst = worst.max((ab - ba).abs());
        if ab > 150.0 * std::f64::consts::FRAC_1_SQRT_2 + 1e-9 {
            return check("wrap-around metric", false, format!("distance {ab} exceeds the torus diameter"));
        }
    }
    check("wrap-around metric", worst < 1e-9, format!("max asymmetry {worst:.1e}"))
}

fn determinism() -> Check {
    let cfg = SimConfig {
        l: 4,
        k: 3,
        np: 3,
        n: 263,
        n_fading: 20,
        n_stat: 50,
        mode: Mode::CellFree,
        scheme: Scheme::Mmse,
        ..SimConfig::desk_scale()
    };
    let (a, b) = (run_placement(&cfg, 3), run_placement(&cfg, 3));
    let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    check("placement determinism", same, if same { "bit-identical".into() } else { "runs differ".into() })
}

fn small_cell_support() -> Check {
    let cfg = SimConfig {
        mode: Mode::SmallCell,
        l: 4,
        m: 2,
        k: 4,
        np: 4,
        n: 264,
        ..SimConfig::desk_scale()
    };
    let Ok(net) = Network::build(&cfg, 1) else {
        return check("small-cell combiner support", false, "network build failed".into());
    };
    let Ok(proc) = Processor::new(Mode::SmallCell, Scheme::Mmse, &net.model, &net.bank) else {
        return check("small-cell combiner support", false, "processor failed".into());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let Ok(u) = net.draw(&mut rng).and_then(|d| proc.combiners(&d.hhat)) else {
        return check("small-cell combiner support", false, "combiner failed".into());
    };
    let mut ok = true;
    for i in 0..4 {
        let l_star = proc.serving_ap(i).unwrap_or(usize::MAX);
        for l in 0..4 {
            let outside_zero = u.view((2 * l, i), (2, 1)).iter().all(|z| z.norm() == 0.0);
            ok &= (l == l_star) != outside_zero;
        }
    }
    check("small-cell combiner support", ok, "entries outside the serving AP are zero".into())
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        matched_fixture(),
        representation(&mut rng),
        scale_invariance(&mut rng),
        oracle(&mut rng),
        mmse_paths(),
        orthogonality(&mut rng),
        torus(&mut rng),
        small_cell_support(),
        determinism(),
    ]
}
