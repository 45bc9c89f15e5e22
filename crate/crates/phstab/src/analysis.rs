//! Trajectory post-processing: decay-rate fitting, energy-inequality
//! verification, observability checks and certificate-vs-empirical
//! comparison.
//!
//! Default slacks: 5% for PDE-derived inequalities (discretization error of
//! the second-order scheme at the default resolution), 0.1% for
//! algebra-only identities.

use crate::certificates::{self, CertificateError, StabilityCertificate};
use crate::model::{Endpoint, PHSystem, ResolvedBounds};
use crate::solver::Trajectory;
use thiserror::Error;

/// Slack for inequalities with discretization error on both sides.
pub const PDE_SLACK: f64 = 0.05;
/// Slack for pure-arithmetic identities.
pub const ALGEBRA_SLACK: f64 = 1e-3;
/// Energies below this are left out of log-domain fits.
pub const LOG_GUARD: f64 = 1e-14;
/// Number of evenly spaced window starts for observability checks.
pub const OBSERVABILITY_WINDOW_STARTS: usize = 8;
/// Relative energy floor below which a discrete state counts as numerically
/// extinct. After finite-time extinction the solver carries O(h^4)-scale
/// dust whose internal ratios are roundoff, not dynamics; inequality pairs
/// whose left side sits below `ENERGY_DUST_FLOOR * E(0)` are recorded as
/// satisfied.
pub const ENERGY_DUST_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("too few usable energy records: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("trajectory too short: needs to cover [s, s + tau] for tau = {tau}")]
    WindowExceedsTrajectory { tau: f64 },
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Least-squares exponential fit `E(t) ~ L_hat E(t0) e^{omega_hat (t - t0)}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayFit {
    pub omega_hat: f64,
    pub l_hat: f64,
    /// RMS residual of the log-energy fit.
    pub residual: f64,
    /// Time window the fit used.
    pub window: (f64, f64),
    pub points: usize,
}

/// Fit the recorded energies in the log domain (entries above the guard
/// only; needs at least 10 of them).
pub fn decay_fit(traj: &Trajectory) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.energies)
        .filter(|(_, &e)| e > LOG_GUARD)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(AnalysisError::TooFewPoints {
            need: 10,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let omega_hat = (n * sxy - sx * sy) / denom;
    let intercept = (sy - omega_hat * sx) / n;
    let residual = (pts
        .iter()
        .map(|&(t, le)| {
            let r = le - (intercept + omega_hat * t);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let t0 = pts[0].0;
    let e0 = traj
        .times
        .iter()
        .zip(&traj.energies)
        .find(|(_, &e)| e > LOG_GUARD)
        .map(|(_, &e)| e)
        .expect("at least one point above guard");
    let l_hat = (intercept + omega_hat * t0).exp() / e0;
    Ok(DecayFit {
        omega_hat,
        l_hat,
        residual,
        window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
    })
}

/// Outcome of one inequality check over recorded pairs/windows.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub pairs_checked: usize,
    /// Worst ratio lhs / rhs over all checked pairs (1 means tight).
    pub worst_ratio: f64,
    pub slack: f64,
    pub pass: bool,
    /// `(s, t)` attaining the worst ratio.
    pub worst_pair: Option<(f64, f64)>,
}

impl InequalityReport {
    fn from_scan(name: &str, slack: f64, scans: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        let mut worst_ratio = 0.0;
        let mut worst_pair = None;
        let mut pairs = 0;
        for (s, t, ratio) in scans {
            pairs += 1;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_pair = Some((s, t));
            }
        }
        InequalityReport {
            name: name.into(),
            pairs_checked: pairs,
            worst_ratio,
            slack,
            pass: worst_ratio <= 1.0 + slack,
            worst_pair,
        }
    }
}

/// Check `E(t) <= e^{c_T (t - s)} E(s)` over all recorded pairs.
pub fn check_growth_bound(traj: &Trajectory, c_t: f64, slack: f64) -> InequalityReport {
    let times = &traj.times;
    let energies = &traj.energies;
    let floor = ENERGY_DUST_FLOOR * traj.initial_energy().max(f64::MIN_POSITIVE);
    let mut scans = Vec::new();
    for i in 0..times.len() {
        if energies[i] <= LOG_GUARD {
            continue;
        }
        for j in i + 1..times.len() {
            if energies[j] <= floor {
                scans.push((times[i], times[j], 0.0));
                continue;
            }
            let bound = (c_t * (times[j] - times[i])).exp() * energies[i];
            scans.push((times[i], times[j], energies[j] / bound));
        }
    }
    InequalityReport::from_scan("growth bound E(t) <= e^{c_T (t-s)} E(s)", slack, scans)
}

/// Finite observability estimate
/// `||x(s + tau)||_{s+tau}^2 <= C_tau * integral_s^{s+tau} |(Hx)(t, endpoint)|^2 dt`
/// on evenly spaced window starts. `C_tau` comes from the certificate chain.
pub fn check_observability(
    traj: &Trajectory,
    sys: &PHSystem,
    bounds: &ResolvedBounds,
    tau: f64,
    endpoint: Endpoint,
) -> Result<InequalityReport> {
    let c_tau = certificates::c_tau(sys, bounds, tau)?;
    let ft = &traj.fine_times;
    let t_end = *ft.last().expect("non-empty trajectory");
    if tau > t_end + 1e-12 {
        return Err(AnalysisError::WindowExceedsTrajectory { tau });
    }
    let e0 = traj.initial_energy();
    let mut scans = Vec::new();
    let max_start = t_end - tau;
    for w in 0..OBSERVABILITY_WINDOW_STARTS {
        let s_target = max_start * w as f64 / (OBSERVABILITY_WINDOW_STARTS - 1).max(1) as f64;
        // snap window ends onto the fine grid
        let i0 = nearest_index(ft, s_target);
        let i1 = nearest_index(ft, ft[i0] + tau);
        if i1 <= i0 {
            continue;
        }
        // trapezoid quadrature of the squared endpoint trace
        let mut integral = 0.0;
        for k in i0..i1 {
            let f_k = match endpoint {
                Endpoint::B => traj.trace_b_sqr(k),
                Endpoint::A => traj.trace_a_sqr(k),
            };
            let f_k1 = match endpoint {
                Endpoint::B => traj.trace_b_sqr(k + 1),
                Endpoint::A => traj.trace_a_sqr(k + 1),
            };
            integral += 0.5 * (f_k + f_k1) * (ft[k + 1] - ft[k]);
        }
        let lhs = 2.0 * traj.fine_energies[i1]; // ||x||_t^2 = 2 E(t)
        let rhs = c_tau * integral;
        // windows ending in numerically extinct states carry no information
        if lhs <= 2.0 * ENERGY_DUST_FLOOR * e0.max(f64::MIN_POSITIVE) {
            scans.push((ft[i0], ft[i1], 0.0));
            continue;
        }
        scans.push((ft[i0], ft[i1], lhs / rhs.max(f64::MIN_POSITIVE)));
    }
    Ok(InequalityReport::from_scan(
        "finite observability ||x(s+tau)||^2 <= C_tau int |trace|^2",
        PDE_SLACK,
        scans,
    ))
}

/// Integral indicator `int ||x(t)||^p dt / ||x(s)||^p` on the recorded
/// energies; finiteness over initial conditions signals exponential
/// stability. Flagged inconclusive unless the tail energy has dropped below
/// 1e-6 of the initial energy.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DatkoIndicator {
    pub value: f64,
    pub p: f64,
    pub conclusive: bool,
}

pub fn datko_indicator(traj: &Trajectory, p: f64) -> DatkoIndicator {
    let e0 = traj.initial_energy().max(f64::MIN_POSITIVE);
    let conclusive = traj.final_energy() < 1e-6 * e0;
    // ||x(t)||^p = (2 E)^{p/2}; the normalization by ||x(0)||^p cancels the 2
    let mut integral = 0.0;
    let ft = &traj.fine_times;
    for k in 0..ft.len() - 1 {
        let f_k = traj.fine_energies[k].powf(p / 2.0);
        let f_k1 = traj.fine_energies[k + 1].powf(p / 2.0);
        integral += 0.5 * (f_k + f_k1) * (ft[k + 1] - ft[k]);
    }
    DatkoIndicator {
        value: integral / e0.powf(p / 2.0),
        p,
        conclusive,
    }
}

/// Side-by-side of the certified decay against the fitted one, plus the
/// soundness check `E(t) <= L e^{omega (t-s)} E(s)` for `t - s >= tau`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CertificateComparison {
    pub certified_omega: f64,
    pub certified_l: f64,
    pub fitted: DecayFit,
    pub soundness: InequalityReport,
    /// Gap `omega_hat - omega` (negative when the certificate is
    /// conservative, which it is by construction).
    pub tightness_gap: f64,
}

pub fn compare_certificate(
    traj: &Trajectory,
    cert: &StabilityCertificate,
) -> Result<CertificateComparison> {
    let fitted = decay_fit(traj)?;
    let times = &traj.times;
    let energies = &traj.energies;
    let floor = ENERGY_DUST_FLOOR * traj.initial_energy().max(f64::MIN_POSITIVE);
    let mut scans = Vec::new();
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let dt = times[j] - times[i];
            if dt < cert.tau {
                continue;
            }
            if energies[i] <= LOG_GUARD {
                continue;
            }
            if energies[j] <= floor {
                scans.push((times[i], times[j], 0.0));
                continue;
            }
            let bound = cert.l * (cert.omega * dt).exp() * energies[i];
            scans.push((times[i], times[j], energies[j] / bound));
        }
    }
    let soundness = InequalityReport::from_scan(
        "certificate soundness E(t) <= L e^{omega (t-s)} E(s)",
        PDE_SLACK,
        scans,
    );
    Ok(CertificateComparison {
        certified_omega: cert.omega,
        certified_l: cert.l,
        tightness_gap: fitted.omega_hat - cert.omega,
        fitted,
        soundness,
    })
}

fn nearest_index(ts: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &t) in ts.iter().enumerate() {
        let d = (t - target).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset_string, validate, Endpoint};
    use crate::solver::SimMeta;
    use crate::solver::{simulate, Grid, SimOptions, Trajectory};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    /// Trajectory with synthetic energies (no PDE run behind it).
    fn synthetic(times: Vec<f64>, energies: Vec<f64>) -> Trajectory {
        let grid = Grid::new((0.0, 1.0), 16).unwrap();
        Trajectory {
            times: times.clone(),
            energies: energies.clone(),
            fine_times: times,
            fine_energies: energies,
            trace_a: Vec::new(),
            trace_b: Vec::new(),
            states: None,
            final_state: Vec::new(),
            n: 1,
            meta: SimMeta {
                grid,
                dt: 0.0,
                cfl: 0.5,
                system_hash: "synthetic".into(),
                compatibility: crate::solver::CompatibilityReport {
                    bc_residual: 0.0,
                    bc_ok: true,
                    curvature_estimate: 0.0,
                    smooth_ok: true,
                    pass: true,
                },
            },
        }
    }

    fn exp_energy(l: f64, omega: f64, n: usize, t_end: f64) -> Trajectory {
        let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let energies: Vec<f64> = times.iter().map(|&t| l * (omega * t).exp()).collect();
        synthetic(times, energies)
    }

    #[test]
    fn decay_fit_recovers_exact_exponential() {
        let traj = exp_energy(4.0, -3.0, 100, 5.0);
        let fit = decay_fit(&traj).unwrap();
        assert!(
            (fit.omega_hat + 3.0).abs() < 1e-9,
            "omega_hat {}",
            fit.omega_hat
        );
        assert!(fit.residual < 1e-10);
        assert!((fit.l_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decay_fit_constant_energy() {
        let traj = exp_energy(2.0, 0.0, 50, 5.0);
        let fit = decay_fit(&traj).unwrap();
        assert!(fit.omega_hat.abs() < 1e-12);
    }

    #[test]
    fn decay_fit_needs_enough_points() {
        let traj = exp_energy(1.0, -1.0, 5, 1.0);
        assert!(matches!(
            decay_fit(&traj),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn growth_bound_pass_and_fail_on_synthetic() {
        // E grows exactly like e^{0.2 t}: passes with c_T = 0.2, fails halved
        let traj = exp_energy(1.0, 0.2, 60, 10.0);
        let full = check_growth_bound(&traj, 0.2, ALGEBRA_SLACK);
        assert!(full.pass, "worst {}", full.worst_ratio);
        let halved = check_growth_bound(&traj, 0.1, ALGEBRA_SLACK);
        assert!(!halved.pass);
        assert!(halved.worst_ratio > 2.0, "e^{{0.1 * 10}} ~ 2.7 violation");
    }

    #[test]
    fn datko_closed_form() {
        // E = e^{-2t} (so ||x||^2 = 2 E, ratio cancels): int e^{-2t} = 0.5
        let traj = exp_energy(1.0, -2.0, 4000, 12.0);
        let d = datko_indicator(&traj, 2.0);
        assert!(d.conclusive);
        assert!((d.value - 0.5).abs() < 1e-4, "value {}", d.value);
    }

    #[test]
    fn datko_inconclusive_without_tail_decay() {
        let traj = exp_energy(1.0, 0.0, 100, 10.0);
        let d = datko_indicator(&traj, 2.0);
        assert!(!d.conclusive);
    }

    fn damped_string_trajectory(
        k: f64,
        t_end: f64,
        cells: usize,
    ) -> (
        crate::model::PHSystem,
        crate::model::ValidationReport,
        Trajectory,
    ) {
        let sys = preset_string("1", "1", k).unwrap();
        let rep = validate(&sys, 5, 5, 1.0).unwrap();
        let grid = Grid::new((0.0, 1.0), cells).unwrap();
        let x0: Vec<Complex64> = grid
            .nodes()
            .iter()
            .flat_map(|&z| {
                let s = (PI * z).sin();
                [Complex64::new(s * s, 0.0), Complex64::new(0.0, 0.0)]
            })
            .collect();
        let opts = SimOptions {
            t_end,
            cells,
            cfl: 0.5,
            record_stride: 8,
            record_states: false,
        };
        let traj = simulate(&sys, &rep.bounds, &x0, &opts).unwrap();
        (sys, rep, traj)
    }

    #[test]
    fn autonomous_contractive_string_growth_bound() {
        let (_, _, traj) = damped_string_trajectory(1.0, 3.0, 200);
        let rep = check_growth_bound(&traj, 0.0, ALGEBRA_SLACK);
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
    }

    #[test]
    fn observability_on_damped_string() {
        let (sys, vrep, traj) = damped_string_trajectory(1.0, 8.0, 200);
        let rep = check_observability(&traj, &sys, &vrep.bounds, 4.0, Endpoint::B).unwrap();
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
        assert_eq!(rep.pairs_checked, OBSERVABILITY_WINDOW_STARTS);
    }

    #[test]
    fn observability_on_conservative_string() {
        // no damper: trace at b is still nonzero (free end) and the
        // inequality holds with the same C_tau
        let (sys, vrep, traj) = damped_string_trajectory(0.0, 8.0, 200);
        let rep = check_observability(&traj, &sys, &vrep.bounds, 4.0, Endpoint::B).unwrap();
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
    }

    #[test]
    fn observability_from_the_left_endpoint() {
        // the estimate also holds against the a-endpoint trace; on the
        // conservative string the a-trace carries the stress only (velocity
        // is clamped), which is still observing
        let (sys, vrep, traj) = damped_string_trajectory(0.0, 8.0, 200);
        let rep = check_observability(&traj, &sys, &vrep.bounds, 4.0, Endpoint::A).unwrap();
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
        assert!(
            rep.worst_ratio > 0.0,
            "conservative windows are informative"
        );
    }

    #[test]
    fn observability_window_gate() {
        let (sys, vrep, traj) = damped_string_trajectory(1.0, 8.0, 200);
        match check_observability(&traj, &sys, &vrep.bounds, 1.5, Endpoint::B) {
            Err(AnalysisError::Certificate(CertificateError::WindowTooShort { .. })) => {}
            other => panic!("expected window gate, got {other:?}"),
        }
    }

    #[test]
    fn observability_scale_invariance() {
        // worst ratio is invariant under x0 -> c x0 (both sides scale by c^2)
        let sys = preset_string("1", "1", 1.0).unwrap();
        let vrep = validate(&sys, 5, 5, 1.0).unwrap();
        let grid = Grid::new((0.0, 1.0), 100).unwrap();
        let mk = |c: f64| {
            let x0: Vec<Complex64> = grid
                .nodes()
                .iter()
                .flat_map(|&z| {
                    let s = (PI * z).sin();
                    [Complex64::new(c * s * s, 0.0), Complex64::new(0.0, 0.0)]
                })
                .collect();
            let opts = SimOptions {
                t_end: 6.0,
                cells: 100,
                cfl: 0.5,
                record_stride: 8,
                record_states: false,
            };
            simulate(&sys, &vrep.bounds, &x0, &opts).unwrap()
        };
        let r1 = check_observability(&mk(1.0), &sys, &vrep.bounds, 4.0, Endpoint::B).unwrap();
        let r2 = check_observability(&mk(7.5), &sys, &vrep.bounds, 4.0, Endpoint::B).unwrap();
        assert!((r1.worst_ratio - r2.worst_ratio).abs() <= 1e-9 * r1.worst_ratio.max(1e-12));
    }

    #[test]
    fn certificate_comparison_on_damped_string() {
        let (sys, vrep, traj) = damped_string_trajectory(1.0, 6.0, 200);
        let kappa =
            crate::model::boundary_dissipation_kappa(&sys, &vrep.bounds, Endpoint::B).unwrap();
        let cert = crate::certificates::decay_certificate(
            &sys,
            &vrep.bounds,
            &vrep,
            kappa,
            &[2.5, 4.0, 8.0],
        )
        .unwrap();
        let cmp = compare_certificate(&traj, &cert).unwrap();
        assert!(cmp.soundness.pass, "worst {}", cmp.soundness.worst_ratio);
        // empirical decay is much faster than certified (near extinction)
        assert!(cmp.fitted.omega_hat <= cert.omega);
        assert!(cmp.tightness_gap < 0.0);
    }
}
