use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cfmimo::config::SimConfig;
use cfmimo::report::{availability_json, fmt_f64, json_f64, write_sweep_csv};
use cfmimo::sim::{network_availability, sweep, GridPoint};
use cfmimo::{selftest, Error, Mode, Result, SMode, Scheme};
use cfmimo_fbl::{
    epsilon_normal, epsilon_rcus_mc, epsilon_saddlepoint, optimize_s, quad_decomposition, solve_saddlepoint,
    Complex64, ScalarChannelPoint,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Finite-blocklength availability of cell-free Massive MIMO")]
struct Cli {
    /// JSON file mirroring the configuration keys; missing keys take the full-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Starting configuration when no --config is given; flags apply on top.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
    /// Master seed (same as --master-seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
}

/// One flag per configuration key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    side_length: Option<f64>,
    #[arg(long, global = true)]
    ap_height: Option<f64>,
    #[arg(long, global = true)]
    wrap_around: Option<bool>,
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Number of APs.
    #[arg(long = "l", global = true)]
    l: Option<usize>,
    /// Antennas per AP.
    #[arg(long = "m", global = true)]
    m: Option<usize>,
    /// Number of UEs.
    #[arg(long = "k", global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    np: Option<usize>,
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    n_ul: Option<usize>,
    #[arg(long, global = true)]
    n_dl: Option<usize>,
    #[arg(long, global = true)]
    payload_bits: Option<u32>,
    #[arg(long, global = true)]
    rho_ul_dbm: Option<f64>,
    #[arg(long, global = true)]
    rho_dl_dbm: Option<f64>,
    #[arg(long, global = true)]
    sigma2_ul_dbm: Option<f64>,
    #[arg(long, global = true)]
    sigma2_dl_dbm: Option<f64>,
    #[arg(long, global = true)]
    delta_deg: Option<f64>,
    #[arg(long, global = true)]
    eps_target: Option<f64>,
    #[arg(long, global = true)]
    n_placements: Option<usize>,
    #[arg(long, global = true)]
    n_fading: Option<usize>,
    #[arg(long, global = true)]
    n_stat: Option<usize>,
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    /// per-realization or per-ue.
    #[arg(long, global = true)]
    s_mode: Option<String>,
    #[arg(long, global = true)]
    angle_per_pair: Option<bool>,
    #[arg(long, global = true)]
    per_realization_norm: Option<bool>,
    #[arg(long, global = true)]
    quad_nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Network availability of one configuration (JSON with per-UE ε).
    Run,
    /// Availability over a grid of (L, M, mode, scheme) (CSV).
    Sweep(SweepArgs),
    /// Saddlepoint, normal approximation and Monte Carlo oracle at one scalar channel.
    FblCheck(FblArgs),
    /// Quick invariant checks.
    Selftest,
}

#[derive(Args)]
struct SweepArgs {
    /// AP counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    ls: Vec<usize>,
    /// Antennas per AP; defaults to the configured M.
    #[arg(long, value_delimiter = ',')]
    ms: Vec<usize>,
    /// Deployment modes; defaults to the configured mode.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Combining schemes; defaults to the configured scheme.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
}

#[derive(Args)]
struct FblArgs {
    #[arg(long, allow_hyphen_values = true)]
    g_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    g_im: f64,
    /// Defaults to the true gain (matched decoding).
    #[arg(long, allow_hyphen_values = true)]
    ghat_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ghat_im: Option<f64>,
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long = "blocklength")]
    blocklength: usize,
    #[arg(long)]
    bits: u32,
    /// Metric parameter; optimized when absent.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

fn parse_opt<T: std::str::FromStr<Err = Error>>(v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(str::parse).transpose()
}

fn build_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::from_file(path)?,
        None => match cli.preset {
            Preset::Full => SimConfig::default(),
            Preset::Desk => SimConfig::desk_scale(),
        },
    };
    let o = &cli.overrides;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = o.$field { cfg.$field = v; } )* };
    }
    set!(l, m, k, np, n, n_ul, n_dl, payload_bits, rho_ul_dbm, rho_dl_dbm, sigma2_ul_dbm, sigma2_dl_dbm);
    set!(delta_deg, eps_target, n_placements, n_fading, n_stat, master_seed, angle_per_pair, per_realization_norm, quad_nodes);
    if let Some(v) = o.side_length {
        cfg.area.side_length = v;
    }
    if let Some(v) = o.ap_height {
        cfg.area.ap_height = v;
    }
    if let Some(v) = o.wrap_around {
        cfg.area.wrap_around = v;
    }
    if let Some(v) = parse_opt::<Mode>(&o.mode)? {
        cfg.mode = v;
    }
    if let Some(v) = parse_opt::<Scheme>(&o.scheme)? {
        cfg.scheme = v;
    }
    if let Some(s) = &o.s_mode {
        cfg.s_mode = match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "per-realization" => SMode::PerRealization,
            "per-ue" => SMode::PerUe,
            other => return Err(Error::Config(format!("unknown s-mode '{other}'"))),
        };
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Run => {
            let cfg = build_config(cli)?;
            cfg.validate()?;
            let r = network_availability(&cfg)?;
            eprintln!(
                "eta_ul = {:.4} [{:.4}, {:.4}]  eta_dl = {:.4} [{:.4}, {:.4}]  samples = {}  max half-split z = {:.2}",
                r.eta_ul, r.eta_ul_ci.lo, r.eta_ul_ci.hi, r.eta_dl, r.eta_dl_ci.lo, r.eta_dl_ci.hi, r.samples,
                r.convergence.max_half_z
            );
            let mut w = output(cli)?;
            serde_json::to_writer_pretty(&mut w, &availability_json(&cfg, &r)?)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        Command::Sweep(args) => {
            let base = build_config(cli)?;
            let ms = if args.ms.is_empty() { vec![base.m] } else { args.ms.clone() };
            let modes = if args.modes.is_empty() {
                vec![base.mode]
            } else {
                args.modes.iter().map(|s| s.parse()).collect::<Result<_>>()?
            };
            let schemes = if args.schemes.is_empty() {
                vec![base.scheme]
            } else {
                args.schemes.iter().map(|s| s.parse()).collect::<Result<_>>()?
            };
            let mut grid = Vec::new();
            for &mode in &modes {
                for &scheme in &schemes {
                    for &m in &ms {
                        for &l in &args.ls {
                            grid.push(GridPoint { l, m, mode, scheme });
                        }
                    }
                }
            }
            for pt in &grid {
                pt.apply(&base).validate()?;
            }
            let rows = sweep(&base, &grid)?;
            let mut w = output(cli)?;
            write_sweep_csv(&mut w, &rows)?;
            w.flush()?;
            let mut first_err = None;
            for row in rows {
                if let Err(e) = row.result {
                    eprintln!("L={} M={} {} {}: {e}", row.point.l, row.point.m, row.point.mode, row.point.scheme);
                    first_err.get_or_insert(e);
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::FblCheck(a) => fbl_check(cli, a),
        Command::Selftest => {
            let checks = selftest::run_all(cli.seed.unwrap_or(1));
            let mut w = output(cli)?;
            let mut failed = 0;
            for c in &checks {
                writeln!(w, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
                failed += usize::from(!c.passed);
            }
            w.flush()?;
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} self-test check(s) failed")));
            }
            Ok(())
        }
    }
}

fn fbl_check(cli: &Cli, a: &FblArgs) -> Result<()> {
    let g = Complex64::new(a.g_re, a.g_im);
    let ghat = Complex64::new(a.ghat_re.unwrap_or(a.g_re), a.ghat_im.unwrap_or(a.g_im));
    let point = ScalarChannelPoint::with_payload_bits(g, ghat, a.sigma2, a.rho, a.blocklength, a.bits)
        .map_err(|e| Error::Config(e.to_string()))?;
    let s = match a.s {
        Some(s) => s,
        None => optimize_s(&point).0,
    };
    let sp = epsilon_saddlepoint(&point, s);
    let normal = epsilon_normal(&point, s)?;
    let dec = quad_decomposition(s, &point);
    let zeta = solve_saddlepoint(point.rate(), &dec)
        .unwrap_or(1.0)
        .min(1.0)
        .min(0.95 * dec.domain_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(1));
    let mc = epsilon_rcus_mc(&point, s, a.samples, zeta, &mut rng)?;
    let est = |value: f64, log_value: f64| json!({ "value": json_f64(value), "log": json_f64(log_value) });
    let report = json!({
        "s": json_f64(s),
        "s_times_sigma2": json_f64(s * point.sigma2),
        "rate_nats": json_f64(point.rate()),
        "saddlepoint": est(sp.value, sp.log_value),
        "zeta_star": json_f64(sp.zeta),
        "normal": est(normal.value, normal.log_value),
        "mc_is": {
            "value": json_f64(mc.value),
            "log": json_f64(mc.log_value),
            "rel_stderr": json_f64(mc.rel_stderr.unwrap_or(f64::NAN)),
            "tilt": json_f64(mc.zeta),
            "samples": a.samples,
            "low_ess": mc.low_ess,
        },
    });
    eprintln!(
        "log eps: saddlepoint {} normal {} mc-is {} (rel se {})",
        fmt_f64(sp.log_value),
        fmt_f64(normal.log_value),
        fmt_f64(mc.log_value),
        fmt_f64(mc.rel_stderr.unwrap_or(f64::NAN))
    );
    let mut w = output(cli)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
