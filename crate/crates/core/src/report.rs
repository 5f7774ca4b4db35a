//! Confidence intervals and result serialization (CSV and JSON). Floats are
//! written with 17 significant digits so they round-trip exactly.

use std::io::Write;
use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::config::SimConfig;
use crate::error::Result;
use crate::sim::{AvailabilityResult, PlacementResult, SweepRow};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Interval {
        lo: if hits == 0 { 0.0 } else { (center - half).max(0.0) },
        hi: if hits == n { 1.0 } else { (center + half).min(1.0) },
    }
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number with 17 significant digits; non-finite values become `null`.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn json_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_f64(x)).collect())
}

fn placement_json(p: &PlacementResult) -> Value {
    let col = |f: &dyn Fn(&crate::sim::UeResult) -> f64| json_vec(&p.ues.iter().map(f).collect::<Vec<_>>());
    json!({
        "placement": p.placement,
        "seed": p.seed,
        "eps_ul": col(&|u| u.eps_ul),
        "eps_ul_se": col(&|u| u.eps_ul_se),
        "eps_dl": col(&|u| u.eps_dl),
        "eps_dl_se": col(&|u| u.eps_dl_se),
        "s_ul_log2": col(&|u| u.s_ul_log2),
        "s_dl_log2": col(&|u| u.s_dl_log2),
        "half_z_ul": col(&|u| u.half_z_ul),
        "half_z_dl": col(&|u| u.half_z_dl),
    })
}

pub fn availability_json(cfg: &SimConfig, r: &AvailabilityResult) -> Result<Value> {
    let mut out = Map::new();
    out.insert("config".into(), serde_json::to_value(cfg)?);
    out.insert("eps_target".into(), json_f64(r.eps_target));
    out.insert("samples".into(), json!(r.samples));
    out.insert("eta_ul".into(), json_f64(r.eta_ul));
    out.insert("eta_ul_ci".into(), json_vec(&[r.eta_ul_ci.lo, r.eta_ul_ci.hi]));
    out.insert("eta_dl".into(), json_f64(r.eta_dl));
    out.insert("eta_dl_ci".into(), json_vec(&[r.eta_dl_ci.lo, r.eta_dl_ci.hi]));
    out.insert(
        "convergence".into(),
        json!({
            "max_half_z": json_f64(r.convergence.max_half_z),
            "frac_above_3": json_f64(r.convergence.frac_above_3),
        }),
    );
    out.insert("eps_ul".into(), json_vec(&r.eps_ul));
    out.insert("eps_dl".into(), json_vec(&r.eps_dl));
    out.insert(
        "placements".into(),
        Value::Array(r.placements.iter().map(placement_json).collect()),
    );
    Ok(Value::Object(out))
}

pub const CSV_HEADER: &str = "LM,L,M,mode,scheme,eta_ul,eta_ul_lo,eta_ul_hi,eta_dl,eta_dl_lo,eta_dl_hi,samples";

/// Sweep table. A failed grid point keeps its row, with `NaN` availabilities
/// and zero samples.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        let p = &row.point;
        let lead = format!("{},{},{},{},{}", p.total_antennas(), p.l, p.m, p.mode, p.scheme);
        match &row.result {
            Ok(r) => writeln!(
                w,
                "{lead},{},{},{},{},{},{},{}",
                fmt_f64(r.eta_ul),
                fmt_f64(r.eta_ul_ci.lo),
                fmt_f64(r.eta_ul_ci.hi),
                fmt_f64(r.eta_dl),
                fmt_f64(r.eta_dl_ci.lo),
                fmt_f64(r.eta_dl_ci.hi),
                r.samples
            )?,
            Err(_) => writeln!(w, "{lead},NaN,NaN,NaN,NaN,NaN,NaN,0")?,
        }
    }
    Ok(())
}
