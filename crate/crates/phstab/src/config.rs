//! JSON configuration ingestion.
//!
//! A config has up to five blocks: `system`, `sim`, `certify`,
//! `counterexample`, `output`. Matrices are flat row-major number arrays;
//! `H`/`K` entries and initial data are coefficient expressions in `t` and
//! `zeta`. The shipped `schema/config.schema.json` documents the full
//! surface.
//!
//! Unknown keys are rejected in strict mode and reported as warnings
//! otherwise. Boundary traces may be declared in `"ab"` order; the loader
//! then swaps the two n-column blocks of `W~_B` into the canonical
//! `(b, a)` order.

use crate::algebra::Mat;
use crate::expr;
use crate::model::{
    preset_string_on, preset_timoshenko, CoefficientField, Endpoint, EntryExpr, ModelError,
    PHSystem,
};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown config key `{0}` (strict mode)")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize, Default)]
pub struct Config {
    pub system: Option<SystemConfig>,
    pub sim: Option<SimConfig>,
    pub certify: Option<CertifyConfig>,
    pub counterexample: Option<CounterexampleConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SystemConfig {
    pub preset: Option<String>,
    pub preset_params: Option<PresetParams>,
    pub n: Option<usize>,
    pub interval: Option<[f64; 2]>,
    /// Flat row-major n x n.
    pub p0: Option<Vec<f64>>,
    pub p1: Option<Vec<f64>>,
    /// Flat row-major n x 2n, in the declared trace order.
    pub w_tilde_b: Option<Vec<f64>>,
    /// "ba" (canonical, default) or "ab" (converted on load).
    pub trace_order: Option<String>,
    /// Flat row-major n x n entry expressions.
    pub h: Option<Vec<String>>,
    pub k_field: Option<Vec<String>>,
    pub bounds: Option<BoundsConfig>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct PresetParams {
    // string preset
    pub rho: Option<String>,
    pub tension: Option<String>,
    pub k: Option<f64>,
    // timoshenko preset
    #[serde(rename = "K")]
    pub shear: Option<String>,
    #[serde(rename = "EI")]
    pub ei: Option<String>,
    #[serde(rename = "I_rho")]
    pub i_rho: Option<String>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct BoundsConfig {
    pub m: Option<f64>,
    pub m_upper: Option<f64>,
    pub m_t: Option<f64>,
    pub l_zeta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SimConfig {
    pub cells: Option<usize>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub record_stride: Option<usize>,
    pub record_states: Option<bool>,
    /// Initial-data expressions, one per state component.
    pub x0: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct CertifyConfig {
    /// Explicit window grid; the default log-spaced grid is used when absent.
    pub tau_grid: Option<Vec<f64>>,
    /// "a" or "b" (default).
    pub endpoint: Option<String>,
    pub kappa_override: Option<f64>,
    /// Cross-check the certificate against a simulation when a sim block is
    /// present (default true).
    pub cross_check: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CounterexampleConfig {
    pub alpha: Option<f64>,
    pub periods: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub formats: Option<Vec<String>>,
}

/// Load a config file. In strict mode unknown keys are errors; otherwise
/// they are returned as warnings.
pub fn load(path: &str, strict: bool) -> Result<(Config, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    parse(&text, strict)
}

pub fn parse(text: &str, strict: bool) -> Result<(Config, Vec<String>)> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    scan_unknown_keys(&value, &mut warnings);
    if strict {
        if let Some(w) = warnings.first() {
            return Err(ConfigError::UnknownKey(w.clone()));
        }
    }
    let config: Config = serde_json::from_value(value).map_err(|e| ConfigError::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    Ok((config, warnings))
}

fn scan_unknown_keys(value: &serde_json::Value, out: &mut Vec<String>) {
    const TOP: &[&str] = &["system", "sim", "certify", "counterexample", "output"];
    const SYSTEM: &[&str] = &[
        "preset",
        "preset_params",
        "n",
        "interval",
        "p0",
        "p1",
        "w_tilde_b",
        "trace_order",
        "h",
        "k_field",
        "bounds",
    ];
    const PRESET: &[&str] = &[
        "rho", "tension", "k", "K", "EI", "I_rho", "alpha1", "alpha2",
    ];
    const BOUNDS: &[&str] = &["m", "m_upper", "m_t", "l_zeta"];
    const SIM: &[&str] = &[
        "cells",
        "cfl",
        "t_end",
        "record_stride",
        "record_states",
        "x0",
    ];
    const CERTIFY: &[&str] = &["tau_grid", "endpoint", "kappa_override", "cross_check"];
    const CE: &[&str] = &["alpha", "periods"];
    const OUTPUT: &[&str] = &["dir", "formats"];

    let check = |obj: &serde_json::Value, allowed: &[&str], prefix: &str, out: &mut Vec<String>| {
        if let Some(map) = obj.as_object() {
            for key in map.keys() {
                if !allowed.contains(&key.as_str()) {
                    out.push(format!("{prefix}{key}"));
                }
            }
        }
    };
    check(value, TOP, "", out);
    if let Some(sys) = value.get("system") {
        check(sys, SYSTEM, "system.", out);
        if let Some(p) = sys.get("preset_params") {
            check(p, PRESET, "system.preset_params.", out);
        }
        if let Some(b) = sys.get("bounds") {
            check(b, BOUNDS, "system.bounds.", out);
        }
    }
    if let Some(s) = value.get("sim") {
        check(s, SIM, "sim.", out);
    }
    if let Some(c) = value.get("certify") {
        check(c, CERTIFY, "certify.", out);
    }
    if let Some(c) = value.get("counterexample") {
        check(c, CE, "counterexample.", out);
    }
    if let Some(o) = value.get("output") {
        check(o, OUTPUT, "output.", out);
    }
}

/// Build the system description from the `system` block.
pub fn build_system(sc: &SystemConfig) -> Result<PHSystem> {
    let mut sys = match sc.preset.as_deref() {
        Some("string") => {
            let p = sc.preset_params.clone().unwrap_or_default();
            let rho = p.rho.unwrap_or_else(|| "1".into());
            let tension = p.tension.unwrap_or_else(|| "1".into());
            let k = p.k.unwrap_or(1.0);
            let interval = sc.interval.map(|iv| (iv[0], iv[1])).unwrap_or((0.0, 1.0));
            preset_string_on(interval, &rho, &tension, k)?
        }
        Some("timoshenko") => {
            let p = sc.preset_params.clone().unwrap_or_default();
            preset_timoshenko(
                p.shear.as_deref().unwrap_or("1"),
                p.rho.as_deref().unwrap_or("1"),
                p.ei.as_deref().unwrap_or("1"),
                p.i_rho.as_deref().unwrap_or("1"),
                p.alpha1.unwrap_or(1.0),
                p.alpha2.unwrap_or(1.0),
            )?
        }
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "unknown preset `{other}` (expected \"string\" or \"timoshenko\")"
            )));
        }
        None => build_explicit_system(sc)?,
    };
    if let Some(b) = &sc.bounds {
        sys.h.declared.m = b.m.or(sys.h.declared.m);
        sys.h.declared.m_upper = b.m_upper.or(sys.h.declared.m_upper);
        sys.h.declared.m_t = b.m_t.or(sys.h.declared.m_t);
        sys.h.declared.l_zeta = b.l_zeta.or(sys.h.declared.l_zeta);
    }
    Ok(sys)
}

fn build_explicit_system(sc: &SystemConfig) -> Result<PHSystem> {
    let n =
        sc.n.ok_or_else(|| ConfigError::Invalid("system.n is required without a preset".into()))?;
    let interval = sc.interval.map(|iv| (iv[0], iv[1])).ok_or_else(|| {
        ConfigError::Invalid("system.interval is required without a preset".into())
    })?;
    let mat = |name: &str, data: &Option<Vec<f64>>, rows: usize, cols: usize| -> Result<Mat> {
        let data = data
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("system.{name} is required")))?;
        Mat::from_row_major(rows, cols, data)
            .map_err(|e| ConfigError::Invalid(format!("system.{name}: {e}")))
    };
    let p0 = mat("p0", &sc.p0, n, n)?;
    let p1 = mat("p1", &sc.p1, n, n)?;
    let mut w = mat("w_tilde_b", &sc.w_tilde_b, n, 2 * n)?;
    match sc.trace_order.as_deref().unwrap_or("ba") {
        "ba" => {}
        "ab" => {
            // declared (a, b): swap the two n-column blocks into (b, a)
            let (left, right) = w
                .split_cols(n)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            w = Mat::hcat(&right, &left).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "trace_order must be \"ba\" or \"ab\", got `{other}`"
            )));
        }
    }
    let h_grid = parse_entry_grid(
        "h",
        sc.h.as_ref()
            .ok_or_else(|| ConfigError::Invalid("system.h is required".into()))?,
        n,
    )?;
    let h = CoefficientField::full(h_grid)?;
    let k = match &sc.k_field {
        Some(entries) => Some(CoefficientField::full(parse_entry_grid(
            "k_field", entries, n,
        )?)?),
        None => None,
    };
    Ok(PHSystem::new(n, interval, p0, p1, w, h, k)?)
}

fn parse_entry_grid(name: &str, flat: &[String], n: usize) -> Result<Vec<Vec<EntryExpr>>> {
    if flat.len() != n * n {
        return Err(ConfigError::Invalid(format!(
            "system.{name} needs {} entries (flat row-major), got {}",
            n * n,
            flat.len()
        )));
    }
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(EntryExpr::parse(&flat[i * n + j])?);
        }
        grid.push(row);
    }
    Ok(grid)
}

/// Parsed initial-data expressions from the sim block.
pub fn parse_x0(sim: &SimConfig, n: usize) -> Result<Vec<expr::ExprAst>> {
    let raw = sim
        .x0
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("sim.x0 is required for simulation".into()))?;
    if raw.len() != n {
        return Err(ConfigError::Invalid(format!(
            "sim.x0 needs {n} component expressions, got {}",
            raw.len()
        )));
    }
    raw.iter()
        .map(|s| {
            expr::parse(s).map_err(|e| ConfigError::Invalid(format!("sim.x0 entry `{s}`: {e}")))
        })
        .collect()
}

pub fn sim_options(sim: &SimConfig) -> crate::solver::SimOptions {
    crate::solver::SimOptions {
        t_end: sim.t_end.unwrap_or(1.0),
        cells: sim.cells.unwrap_or(200),
        cfl: sim.cfl.unwrap_or(0.5),
        record_stride: sim.record_stride.unwrap_or(1),
        record_states: sim.record_states.unwrap_or(false),
    }
}

pub fn endpoint_of(certify: &CertifyConfig) -> Result<Endpoint> {
    match certify.endpoint.as_deref().unwrap_or("b") {
        "a" => Ok(Endpoint::A),
        "b" => Ok(Endpoint::B),
        other => Err(ConfigError::Invalid(format!(
            "endpoint must be \"a\" or \"b\", got `{other}`"
        ))),
    }
}
