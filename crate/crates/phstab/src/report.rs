//! Report and series emission: JSON documents plus RFC-4180-style CSV
//! (header row, comma separator, `.` decimal point).
//!
//! Reports are deterministic for a fixed config and crate version; the only
//! wall-clock content is the `generated_at_unix` field, which consumers
//! should exclude from comparisons.

use crate::analysis::{CertificateComparison, DatkoIndicator, DecayFit, InequalityReport};
use crate::certificates::StabilityCertificate;
use crate::model::ValidationReport;
use crate::solver::Trajectory;
use crate::transportnet::GrowthSequence;
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

/// Convention notes attached to every report: places where published
/// formulations differ by harmless factors or orderings, so downstream
/// consumers see the choices explicitly.
pub fn paper_notes() -> Vec<&'static str> {
    vec![
        "W_B is defined as W~_B [P1 -P1; I I]^{-1} and keeps the global factor 1/2 \
         from the block inverse; displays that drop the factor rescale W_B Sigma W_B^* \
         by a positive constant, which changes no rank or definiteness conclusion.",
        "Boundary traces are ordered (b, a); configs may declare trace_order \"ab\" and \
         the loader swaps the two n-column blocks of W~_B on load.",
        "kappa_tau uses the strengthened constant (2 M (||P0|| + K_max) ||P1^-1|| + L_zeta)/m \
         that the comparison step X <= (||X||/m) H requires; the literal constant \
         2 ||P0^* P1^-1|| + L_zeta/m is reported alongside.",
        "The transport-network per-period growth factor is measured by the exact tracer; \
         the idealized constant-profile factor 2*alpha is recorded for comparison and only \
         the qualitative dichotomy (decaying / bounded / growing) is asserted.",
        "kappa is measured on kernel traces u in ker W~_B via Re(Ax|x) = \
         (1/2)(x(b)^* P1 x(b) - x(a)^* P1 x(a)) <= -kappa |u_endpoint|^2; the H-weighted \
         variant kappa_H = kappa / max_t lambda_max(H(t, endpoint))^2 is reported alongside.",
        "omega certifies squared weighted energies; unsquared norms decay at \
         amplitude_rate = omega/2 with prefactor sqrt(L).",
    ]
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn validation_json(label: &str, hash: &str, report: &ValidationReport) -> Value {
    json!({
        "generated_at_unix": unix_now(),
        "paper_notes": paper_notes(),
        "system": {"label": label, "hash": hash},
        "validation": report,
    })
}

pub struct SimulationSummary<'a> {
    pub traj: &'a Trajectory,
    pub fit: Option<&'a DecayFit>,
}

pub fn simulation_json(label: &str, summary: &SimulationSummary) -> Value {
    let t = summary.traj;
    let e0 = t.initial_energy();
    let ef = t.final_energy();
    json!({
        "generated_at_unix": unix_now(),
        "paper_notes": paper_notes(),
        "system": {"label": label, "hash": t.meta.system_hash},
        "grid": t.meta.grid,
        "dt": t.meta.dt,
        "cfl": t.meta.cfl,
        "compatibility": t.meta.compatibility,
        "initial_energy": e0,
        "final_energy": ef,
        "relative_drift": (ef - e0).abs() / e0.max(f64::MIN_POSITIVE),
        "records": t.times.len(),
        "fine_steps": t.fine_times.len(),
        "decay_fit": summary.fit,
    })
}

pub fn certificate_json(
    label: &str,
    hash: &str,
    kappa: f64,
    kappa_h: f64,
    kappa_tau_literal: f64,
    cert: &StabilityCertificate,
    comparison: Option<&CertificateComparison>,
) -> Value {
    json!({
        "generated_at_unix": unix_now(),
        "paper_notes": paper_notes(),
        "system": {"label": label, "hash": hash},
        "kappa": {"kernel_trace": kappa, "h_weighted": kappa_h},
        "kappa_tau_literal": kappa_tau_literal,
        "certificate": cert,
        "simulation_cross_check": comparison,
    })
}

pub fn counterexample_json(alpha: f64, seq: &GrowthSequence, critical_alpha: Option<f64>) -> Value {
    json!({
        "generated_at_unix": unix_now(),
        "paper_notes": paper_notes(),
        "alpha": alpha,
        "periods": seq.norms.len() - 1,
        "verdict": seq.verdict,
        "measured_period_factor": seq.measured_factor,
        "idealized_period_factor": 2.0 * alpha.abs(),
        "measured_critical_alpha": critical_alpha,
        "norms": seq.norms,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn combined_report_json(
    label: &str,
    hash: &str,
    validation: &ValidationReport,
    kappa: Option<(f64, f64)>,
    certificate: Option<&StabilityCertificate>,
    certificate_refusal: Option<String>,
    simulation: Option<Value>,
    checks: Vec<(&str, Value)>,
) -> Value {
    let mut checks_obj = serde_json::Map::new();
    for (name, v) in checks {
        checks_obj.insert(name.to_string(), v);
    }
    json!({
        "generated_at_unix": unix_now(),
        "paper_notes": paper_notes(),
        "system": {"label": label, "hash": hash},
        "validation": validation,
        "kappa": kappa.map(|(k, kh)| json!({"kernel_trace": k, "h_weighted": kh})),
        "certificate": certificate,
        "certificate_refusal": certificate_refusal,
        "simulation": simulation,
        "checks": Value::Object(checks_obj),
    })
}

pub fn inequality_json(r: &InequalityReport) -> Value {
    serde_json::to_value(r).expect("serializable")
}

pub fn datko_json(d: &DatkoIndicator) -> Value {
    serde_json::to_value(d).expect("serializable")
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// `t, E, |trace_a|^2, |trace_b|^2` at the decimated instants.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,E,trace_a_sqr,trace_b_sqr")?;
    for (k, &t) in traj.fine_times.iter().enumerate() {
        // decimate to the recorded instants but keep exact trace alignment
        if !traj.times.contains(&t) {
            continue;
        }
        writeln!(
            f,
            "{},{},{},{}",
            fmt(t),
            fmt(traj.fine_energies[k]),
            fmt(traj.trace_a_sqr(k)),
            fmt(traj.trace_b_sqr(k))
        )?;
    }
    Ok(())
}

/// Long-format state snapshots: `t, zeta, component, re, im`.
pub fn write_states_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let Some(states) = &traj.states else {
        return Ok(());
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,zeta,component,re,im")?;
    let nodes = traj.meta.grid.nodes();
    for (snap, &t) in states.iter().zip(&traj.times) {
        for (i, &z) in nodes.iter().enumerate() {
            for c in 0..traj.n {
                let v = snap[i * traj.n + c];
                writeln!(f, "{},{},{},{},{}", fmt(t), fmt(z), c, fmt(v.re), fmt(v.im))?;
            }
        }
    }
    Ok(())
}

/// `k, norm, ratio` per period.
pub fn write_growth_csv(path: &Path, seq: &GrowthSequence) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "k,norm,ratio")?;
    for (k, &n) in seq.norms.iter().enumerate() {
        let ratio = if k == 0 {
            String::new()
        } else {
            fmt(seq.ratios[k - 1])
        };
        writeln!(f, "{},{},{}", k, fmt(n), ratio)?;
    }
    Ok(())
}

/// `s, lhs, rhs`-style pair dumps for plotting inequality checks.
pub fn write_pairs_csv(path: &Path, rows: &[(f64, f64, f64)]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "s,lhs,rhs")?;
    for (s, lhs, rhs) in rows {
        writeln!(f, "{},{},{}", fmt(*s), fmt(*lhs), fmt(*rhs))?;
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    // shortest round-trip representation, '.' decimal separator; switch to
    // scientific notation outside a sane plain-decimal range
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() < 1e-4 || x.abs() >= 1e15 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notes_cover_every_convention_flag() {
        let notes = paper_notes();
        assert!(notes.iter().any(|n| n.contains("W_B Sigma W_B^*")));
        assert!(notes.iter().any(|n| n.contains("trace_order")));
        assert!(notes.iter().any(|n| n.contains("kappa_tau")));
        assert!(notes.iter().any(|n| n.contains("2*alpha")));
        assert!(notes.iter().any(|n| n.contains("amplitude_rate")));
    }

    #[test]
    fn csv_uses_dot_decimal_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        write_pairs_csv(&path, &[(0.5, 1.25, 2.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("s,lhs,rhs\n"));
        assert!(text.contains("0.5,1.25,2"));
    }
}
