//! Command implementations behind the `phstab` binary.
//!
//! Exit codes are a stable contract:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 2    | hypothesis validation failed              |
//! | 3    | numerical blow-up guard fired             |
//! | 4    | certificate hypotheses unmet              |
//! | 64   | config / parse error                      |

use crate::analysis;
use crate::certificates::{self, CertificateError};
use crate::config::{self, Config};
use crate::model::{self, Endpoint, PHSystem, ValidationReport};
use crate::report;
use crate::solver::{self, SolveError};
use crate::transportnet;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_HYPOTHESES: i32 = 4;
pub const EXIT_CONFIG: i32 = 64;

/// Validation sampling defaults: grid and horizon used when no sim block
/// pins them.
const VALIDATE_NT: usize = 17;
const VALIDATE_NZ: usize = 9;

#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub config_path: Option<String>,
    pub out_dir: PathBuf,
    pub strict: bool,
}

fn load_config(opts: &CommonOpts) -> Result<Config, i32> {
    let Some(path) = &opts.config_path else {
        eprintln!("error: --config PATH is required for this command");
        return Err(EXIT_CONFIG);
    };
    match config::load(path, opts.strict) {
        Ok((cfg, warnings)) => {
            for w in warnings {
                eprintln!("warning: unknown config key `{w}`");
            }
            Ok(cfg)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_CONFIG)
        }
    }
}

fn build_system(cfg: &Config) -> Result<PHSystem, i32> {
    let Some(sc) = &cfg.system else {
        eprintln!("error: config has no `system` block");
        return Err(EXIT_CONFIG);
    };
    config::build_system(sc).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

fn validation_horizon(cfg: &Config) -> f64 {
    cfg.sim
        .as_ref()
        .and_then(|s| s.t_end)
        .map(|t| t.max(1.0))
        .unwrap_or(10.0)
}

fn run_validation(sys: &PHSystem, horizon: f64) -> Result<ValidationReport, i32> {
    model::validate(sys, VALIDATE_NT, VALIDATE_NZ, horizon).map_err(|e| {
        eprintln!("error: validation could not run: {e}");
        EXIT_CONFIG
    })
}

fn ensure_out_dir(dir: &Path) -> Result<(), i32> {
    std::fs::create_dir_all(dir).map_err(|e| {
        eprintln!(
            "error: cannot create output directory {}: {e}",
            dir.display()
        );
        EXIT_CONFIG
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), i32> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_CONFIG
    })
}

fn print_validation_table(rep: &ValidationReport) {
    println!("{:<64} {:>8}", "hypothesis", "verdict");
    for r in &rep.records {
        let verdict = match r.verdict {
            model::Verdict::Pass => "pass",
            model::Verdict::Fail => "FAIL",
            model::Verdict::Unknown => "unknown",
        };
        println!("{:<64} {:>8}", r.name, verdict);
        if r.verdict == model::Verdict::Fail {
            println!("    {}", r.detail);
            if let Some(w) = &r.witness {
                match (w.t, w.zeta) {
                    (Some(t), Some(z)) => println!(
                        "    witness: (t, zeta) = ({t:.6}, {z:.6}), eigenvalue {:.6e}",
                        w.eigenvalue
                    ),
                    _ => println!("    witness eigenvalue {:.6e}", w.eigenvalue),
                }
            }
        }
    }
    println!(
        "generator_ok = {}, contractive_ok = {}",
        rep.generator_ok, rep.contractive_ok
    );
}

/// `phstab validate --config PATH`
pub fn cmd_validate(opts: &CommonOpts) -> i32 {
    let cfg = match load_config(opts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let sys = match build_system(&cfg) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let rep = match run_validation(&sys, validation_horizon(&cfg)) {
        Ok(r) => r,
        Err(code) => return code,
    };
    print_validation_table(&rep);
    if ensure_out_dir(&opts.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    let doc = report::validation_json(&sys.label, &sys.fingerprint(), &rep);
    if let Err(code) = write_json(&opts.out_dir.join("validation.json"), &doc) {
        return code;
    }
    if rep.generator_ok {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn run_simulation(
    cfg: &Config,
    sys: &PHSystem,
    rep: &ValidationReport,
) -> Result<solver::Trajectory, i32> {
    let Some(sim) = &cfg.sim else {
        eprintln!("error: config has no `sim` block");
        return Err(EXIT_CONFIG);
    };
    let sim_opts = config::sim_options(sim);
    let x0_exprs = config::parse_x0(sim, sys.n).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let grid = solver::Grid::new(sys.interval, sim_opts.cells).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let x0 = solver::sample_initial(sys, &x0_exprs, &grid).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    match solver::simulate(sys, &rep.bounds, &x0, &sim_opts) {
        Ok(traj) => {
            if !traj.meta.compatibility.pass {
                eprintln!(
                    "warning: initial data compatibility check failed \
                     (bc residual {:.3e}, curvature estimate {:.3e})",
                    traj.meta.compatibility.bc_residual, traj.meta.compatibility.curvature_estimate
                );
            }
            Ok(traj)
        }
        Err(SolveError::BlowUp { t, ratio }) => {
            eprintln!("error: blow-up guard fired at t = {t:.6} (E/E0 = {ratio:.3e})");
            Err(EXIT_BLOWUP)
        }
        Err(SolveError::NonFinite { t }) => {
            eprintln!("error: non-finite state at t = {t:.6}");
            Err(EXIT_BLOWUP)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_CONFIG)
        }
    }
}

/// `phstab simulate --config PATH`
pub fn cmd_simulate(opts: &CommonOpts) -> i32 {
    let cfg = match load_config(opts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let sys = match build_system(&cfg) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let rep = match run_validation(&sys, validation_horizon(&cfg)) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if !rep.generator_ok {
        print_validation_table(&rep);
        return EXIT_VALIDATION;
    }
    let traj = match run_simulation(&cfg, &sys, &rep) {
        Ok(t) => t,
        Err(code) => return code,
    };
    if ensure_out_dir(&opts.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    let fit = analysis::decay_fit(&traj).ok();
    let doc = report::simulation_json(
        &sys.label,
        &report::SimulationSummary {
            traj: &traj,
            fit: fit.as_ref(),
        },
    );
    if let Err(code) = write_json(&opts.out_dir.join("summary.json"), &doc) {
        return code;
    }
    if let Err(e) = report::write_trajectory_csv(&opts.out_dir.join("trajectory.csv"), &traj) {
        eprintln!("error: cannot write trajectory.csv: {e}");
        return EXIT_CONFIG;
    }
    if traj.states.is_some() {
        if let Err(e) = report::write_states_csv(&opts.out_dir.join("states.csv"), &traj) {
            eprintln!("error: cannot write states.csv: {e}");
            return EXIT_CONFIG;
        }
    }
    println!(
        "simulated t in [0, {:.6}]: E(0) = {:.6e}, E(end) = {:.6e}",
        traj.fine_times.last().unwrap(),
        traj.initial_energy(),
        traj.final_energy()
    );
    EXIT_OK
}

struct CertifyOutcome {
    kappa: f64,
    kappa_h: f64,
    cert: certificates::StabilityCertificate,
}

fn run_certification(
    cfg: &Config,
    sys: &PHSystem,
    rep: &ValidationReport,
) -> Result<CertifyOutcome, (i32, String)> {
    let certify = cfg.certify.clone().unwrap_or_default();
    let endpoint = config::endpoint_of(&certify).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let horizon = validation_horizon(cfg);
    let kappa = match certify.kappa_override {
        Some(k) => k,
        None => model::boundary_dissipation_kappa(sys, &rep.bounds, endpoint)
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?,
    };
    let kappa_h = model::boundary_dissipation_kappa_weighted(sys, &rep.bounds, endpoint, horizon)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let tau_grid = match &certify.tau_grid {
        Some(g) => g.clone(),
        None => certificates::default_tau_grid(sys, &rep.bounds)
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?,
    };
    match certificates::decay_certificate(sys, &rep.bounds, rep, kappa, &tau_grid) {
        Ok(cert) => Ok(CertifyOutcome {
            kappa,
            kappa_h,
            cert,
        }),
        Err(e @ CertificateError::NotContractive)
        | Err(e @ CertificateError::NoDissipation { .. })
        | Err(e @ CertificateError::NoAdmissibleTau { .. }) => {
            Err((EXIT_HYPOTHESES, e.to_string()))
        }
        Err(e) => Err((EXIT_CONFIG, e.to_string())),
    }
}

/// `phstab certify --config PATH`
pub fn cmd_certify(opts: &CommonOpts) -> i32 {
    let cfg = match load_config(opts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let sys = match build_system(&cfg) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let rep = match run_validation(&sys, validation_horizon(&cfg)) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if !rep.generator_ok {
        print_validation_table(&rep);
        return EXIT_VALIDATION;
    }
    let outcome = match run_certification(&cfg, &sys, &rep) {
        Ok(o) => o,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };

    // optional simulation cross-check
    let cross = cfg
        .certify
        .as_ref()
        .and_then(|c| c.cross_check)
        .unwrap_or(true);
    let comparison = if cross && cfg.sim.is_some() {
        match run_simulation(&cfg, &sys, &rep) {
            Ok(traj) => match analysis::compare_certificate(&traj, &outcome.cert) {
                Ok(c) => Some(c),
                Err(e) => {
                    eprintln!("warning: certificate cross-check skipped: {e}");
                    None
                }
            },
            Err(code) => return code,
        }
    } else {
        None
    };

    if ensure_out_dir(&opts.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    let literal = certificates::kappa_tau_literal(&sys, &rep.bounds).unwrap_or(f64::NAN);
    let doc = report::certificate_json(
        &sys.label,
        &sys.fingerprint(),
        outcome.kappa,
        outcome.kappa_h,
        literal,
        &outcome.cert,
        comparison.as_ref(),
    );
    if let Err(code) = write_json(&opts.out_dir.join("certificate.json"), &doc) {
        return code;
    }
    println!(
        "certificate: tau = {:.6}, C_tau = {:.6e}, rho_tau = {:.6}, omega = {:.6} (squared energy), L = {:.6}",
        outcome.cert.tau, outcome.cert.c_tau, outcome.cert.rho_tau, outcome.cert.omega, outcome.cert.l
    );
    if let Some(c) = &comparison {
        println!(
            "cross-check: fitted omega_hat = {:.6}, soundness {} (worst ratio {:.4})",
            c.fitted.omega_hat,
            if c.soundness.pass { "pass" } else { "FAIL" },
            c.soundness.worst_ratio
        );
    }
    EXIT_OK
}

/// `phstab counterexample [--alpha R] [--periods N]`
pub fn cmd_counterexample(opts: &CommonOpts, alpha: Option<f64>, periods: Option<usize>) -> i32 {
    // config block provides defaults; flags win
    let cfg = if opts.config_path.is_some() {
        match load_config(opts) {
            Ok(c) => c,
            Err(code) => return code,
        }
    } else {
        Config::default()
    };
    let ce = cfg.counterexample.as_ref();
    let alpha = alpha.or(ce.and_then(|c| c.alpha)).unwrap_or(0.5);
    let periods = periods.or(ce.and_then(|c| c.periods)).unwrap_or(50);
    if periods > 200 {
        eprintln!("error: periods must be at most 200, got {periods}");
        return EXIT_CONFIG;
    }
    let spec = model::preset_counterexample(alpha);
    let net = spec.network();
    let seq = transportnet::growth_sequence(&net, periods);
    let critical = transportnet::measured_critical_alpha(30);

    if ensure_out_dir(&opts.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    if let Err(e) = report::write_growth_csv(&opts.out_dir.join("counterexample.csv"), &seq) {
        eprintln!("error: cannot write counterexample.csv: {e}");
        return EXIT_CONFIG;
    }
    let doc = report::counterexample_json(alpha, &seq, Some(critical));
    if let Err(code) = write_json(&opts.out_dir.join("counterexample.json"), &doc) {
        return code;
    }
    let verdict = match seq.verdict {
        transportnet::GrowthVerdict::Decaying => "decaying",
        transportnet::GrowthVerdict::Bounded => "bounded",
        transportnet::GrowthVerdict::Growing => "growing",
    };
    println!(
        "verdict: {verdict} (alpha = {alpha}, measured per-period factor {:.9}, \
         measured critical alpha {:.9})",
        seq.measured_factor, critical
    );
    EXIT_OK
}

/// `phstab report --config PATH`: validation, simulation, certification and
/// every inequality check in one document.
pub fn cmd_report(opts: &CommonOpts) -> i32 {
    let cfg = match load_config(opts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let sys = match build_system(&cfg) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let rep = match run_validation(&sys, validation_horizon(&cfg)) {
        Ok(r) => r,
        Err(code) => return code,
    };
    print_validation_table(&rep);
    if ensure_out_dir(&opts.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    if !rep.generator_ok {
        let doc = report::combined_report_json(
            &sys.label,
            &sys.fingerprint(),
            &rep,
            None,
            None,
            Some("generator hypotheses failed".into()),
            None,
            vec![],
        );
        let _ = write_json(&opts.out_dir.join("report.json"), &doc);
        return EXIT_VALIDATION;
    }

    let certification = run_certification(&cfg, &sys, &rep);
    let mut checks: Vec<(&str, serde_json::Value)> = Vec::new();
    let mut sim_doc = None;

    if cfg.sim.is_some() {
        let traj = match run_simulation(&cfg, &sys, &rep) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let fit = analysis::decay_fit(&traj).ok();
        sim_doc = Some(report::simulation_json(
            &sys.label,
            &report::SimulationSummary {
                traj: &traj,
                fit: fit.as_ref(),
            },
        ));
        if let Err(e) = report::write_trajectory_csv(&opts.out_dir.join("trajectory.csv"), &traj) {
            eprintln!("error: cannot write trajectory.csv: {e}");
            return EXIT_CONFIG;
        }

        let ct = certificates::c_t(&rep.bounds);
        checks.push((
            "growth_bound",
            report::inequality_json(&analysis::check_growth_bound(
                &traj,
                ct,
                analysis::PDE_SLACK,
            )),
        ));
        checks.push((
            "datko",
            report::datko_json(&analysis::datko_indicator(&traj, 2.0)),
        ));

        if let Ok(outcome) = &certification {
            let endpoint = cfg
                .certify
                .as_ref()
                .map(|c| config::endpoint_of(c).unwrap_or(Endpoint::B))
                .unwrap_or(Endpoint::B);
            match analysis::check_observability(
                &traj,
                &sys,
                &rep.bounds,
                outcome.cert.tau,
                endpoint,
            ) {
                Ok(obs) => checks.push(("observability", report::inequality_json(&obs))),
                Err(e) => eprintln!("warning: observability check skipped: {e}"),
            }
            match analysis::compare_certificate(&traj, &outcome.cert) {
                Ok(cmp) => checks.push((
                    "certificate_comparison",
                    serde_json::to_value(&cmp).expect("serializable"),
                )),
                Err(e) => eprintln!("warning: certificate comparison skipped: {e}"),
            }
        }
    }

    // without contractivity no certificate exists, but the growth bound
    // still gives the local solution-family bound M_tau = exp(c_T tau / 2)
    if !rep.contractive_ok {
        let ct = certificates::c_t(&rep.bounds);
        if let Ok(gamma) = certificates::gamma_min(&sys, &rep.bounds) {
            let tau_repr = 4.0 * gamma * sys.interval_length();
            checks.push((
                "non_contractive_growth",
                serde_json::json!({
                    "c_t": ct,
                    "m_tau_formula": "exp(c_T * tau / 2)",
                    "representative_tau": tau_repr,
                    "m_tau_at_representative_tau": (ct * tau_repr / 2.0).exp(),
                }),
            ));
        }
    }

    let (kappa_pair, cert_ref, refusal) = match &certification {
        Ok(o) => (Some((o.kappa, o.kappa_h)), Some(&o.cert), None),
        Err((_, msg)) => (None, None, Some(msg.clone())),
    };
    let doc = report::combined_report_json(
        &sys.label,
        &sys.fingerprint(),
        &rep,
        kappa_pair,
        cert_ref,
        refusal,
        sim_doc,
        checks,
    );
    if let Err(code) = write_json(&opts.out_dir.join("report.json"), &doc) {
        return code;
    }
    println!(
        "report written to {}",
        opts.out_dir.join("report.json").display()
    );
    EXIT_OK
}
