//! The explicit constant chain behind the exponential decay certificate.
//!
//! For a validated system with contractive evolution family and boundary
//! dissipation constant `kappa > 0`, the chain runs
//!
//! ```text
//!   gamma   = ||P1^-1|| / m                      (characteristic-speed bound)
//!   kappa_t = (2 M (||P0|| + K_max) ||P1^-1|| + L_zeta) / m
//!   c_T     = (M_T + 2 M K_max) / m              (energy growth exponent)
//!   C_tau   = e^{c_T tau + kappa_t (b-a)} (b-a) / (tau - 2 gamma (b-a))
//!   rho_tau = 1 / (1 + 2 kappa / C_tau)
//!   omega   = ln(rho_tau) / tau                  (squared-energy exponent)
//!   L       = rho_tau^-1 M / m
//! ```
//!
//! valid for observability windows `tau > 2 gamma (b-a)`. The final
//! estimate for the weighted energies is
//! `||x(t)||_t^2 <= L e^{omega (t-s)} ||x(s)||_s^2`; for unsquared norms use
//! `amplitude_rate = omega / 2` with prefactor `sqrt(L)`.
//!
//! `kappa_tau` here strengthens the textbook constant
//! `2 ||P0^* P1^-1|| + L_zeta / m` by an `M/m` factor that the comparison
//! step `X <= (||X|| / m) H` actually needs; the literal constant is
//! reported alongside for reference.

use crate::algebra;
use crate::model::{ModelError, PHSystem, ResolvedBounds, ValidationReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("observability window too short: tau = {tau} must exceed 2 gamma (b-a) = {min}")]
    WindowTooShort { tau: f64, min: f64 },
    #[error(
        "contractivity not established: the decay certificate requires \
         W_B Sigma W_B^* >= 0 and H K + K^* H + dH/dt <= 0; without \
         contractivity, boundary dissipation alone does not imply exponential \
         stability (the two-line transport network in `transportnet` is a \
         bounded, non-decaying example)"
    )]
    NotContractive,
    #[error("no boundary dissipation: kappa must be positive, got {kappa}")]
    NoDissipation { kappa: f64 },
    #[error("no admissible tau in the grid (all at or below 2 gamma (b-a) = {min})")]
    NoAdmissibleTau { min: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Algebra(#[from] algebra::AlgebraError),
}

pub type Result<T> = std::result::Result<T, CertificateError>;

/// The certified constant chain plus the window that produced it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityCertificate {
    pub gamma: f64,
    pub kappa_tau: f64,
    pub c_t: f64,
    /// Observability window the optimizer picked.
    pub tau: f64,
    pub c_tau: f64,
    /// Boundary dissipation constant fed into the chain.
    pub kappa: f64,
    pub rho_tau: f64,
    /// Squared-energy decay exponent, `ln(rho_tau) / tau < 0`.
    pub omega: f64,
    /// Squared-energy prefactor `rho_tau^-1 M / m >= 1`.
    pub l: f64,
    /// Exponent for unsquared norms (`omega / 2`, prefactor `sqrt(L)`).
    pub amplitude_rate: f64,
    pub assumptions_used: CertificateAssumptions,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CertificateAssumptions {
    pub contractive_evolution_family: bool,
}

impl StabilityCertificate {
    fn check_invariants(&self, interval_len: f64) -> Result<()> {
        let min = 2.0 * self.gamma * interval_len;
        if !(self.tau > min) {
            return Err(CertificateError::WindowTooShort { tau: self.tau, min });
        }
        debug_assert!(self.rho_tau > 0.0 && self.rho_tau < 1.0);
        debug_assert!(self.omega < 0.0);
        debug_assert!(self.l >= 1.0);
        Ok(())
    }
}

/// Smallest `gamma` with `+-P1^-1 + gamma H >= 0`: since `H >= m I`, the
/// value `||P1^-1|| / m` always works.
pub fn gamma_min(sys: &PHSystem, bounds: &ResolvedBounds) -> Result<f64> {
    let p1_inv_norm = sys.p1.inverse()?.norm_2()?;
    Ok(p1_inv_norm / bounds.m)
}

/// Rigorous comparison constant for the finite observability estimate:
/// `(2 M (||P0|| + K_max) ||P1^-1|| + L_zeta) / m`.
pub fn kappa_tau(sys: &PHSystem, bounds: &ResolvedBounds) -> Result<f64> {
    let p0_norm = sys.p0.norm_2()?;
    let p1_inv_norm = sys.p1.inverse()?.norm_2()?;
    Ok((2.0 * bounds.m_upper * (p0_norm + bounds.k_max) * p1_inv_norm + bounds.l_zeta) / bounds.m)
}

/// The literal textbook constant `2 ||P0^* P1^-1|| + L_zeta / m`, reported
/// next to the rigorous variant.
pub fn kappa_tau_literal(sys: &PHSystem, bounds: &ResolvedBounds) -> Result<f64> {
    let prod = sys.p0.adjoint().mul(&sys.p1.inverse()?)?;
    Ok(2.0 * prod.norm_2()? + bounds.l_zeta / bounds.m)
}

/// Energy growth exponent `c_T = (M_T + 2 M K_max) / m`:
/// `||x(t)||_t^2 <= e^{c_T (t-s)} ||x(s)||_s^2` along every solution.
pub fn c_t(bounds: &ResolvedBounds) -> f64 {
    (bounds.m_t + 2.0 * bounds.m_upper * bounds.k_max) / bounds.m
}

/// Observability constant
/// `C_tau = e^{c_T tau + kappa_tau (b-a)} (b-a) / (tau - 2 gamma (b-a))`.
pub fn c_tau(sys: &PHSystem, bounds: &ResolvedBounds, tau: f64) -> Result<f64> {
    let gamma = gamma_min(sys, bounds)?;
    let len = sys.interval_length();
    let min = 2.0 * gamma * len;
    if !(tau > min) {
        return Err(CertificateError::WindowTooShort { tau, min });
    }
    let kt = kappa_tau(sys, bounds)?;
    let ct = c_t(bounds);
    Ok((ct * tau + kt * len).exp() * len / (tau - min))
}

/// Window-stacking refinement: `n` copies of a window `tau0` with solution
/// family bound `M0` give `(n tau0, M0^2 C_tau0 / n)`.
pub fn refine_c_tau(c_tau0: f64, tau0: f64, m0: f64, n: usize) -> (f64, f64) {
    assert!(n >= 1, "refinement needs n >= 1");
    assert!(m0 >= 1.0, "solution family bound must be at least 1");
    assert!(c_tau0 > 0.0, "C_tau must be positive");
    (n as f64 * tau0, m0 * m0 * c_tau0 / n as f64)
}

/// Default observability window grid: 32 log-spaced points in
/// `(2 gamma (b-a) * 1.01, 50 gamma (b-a))`.
pub fn default_tau_grid(sys: &PHSystem, bounds: &ResolvedBounds) -> Result<Vec<f64>> {
    let gamma = gamma_min(sys, bounds)?;
    let len = sys.interval_length();
    let lo = 2.0 * gamma * len * 1.01;
    let hi = 50.0 * gamma * len;
    let n = 32;
    Ok((0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            (lo.ln() + f * (hi.ln() - lo.ln())).exp()
        })
        .collect())
}

/// Build the decay certificate: picks the admissible `tau` with the most
/// negative `omega` from the grid.
///
/// Refuses when the validation report does not establish contractivity
/// (boundedness can genuinely fail then) or when `kappa = 0` (no boundary
/// dissipation to harvest).
pub fn decay_certificate(
    sys: &PHSystem,
    bounds: &ResolvedBounds,
    validation: &ValidationReport,
    kappa: f64,
    tau_grid: &[f64],
) -> Result<StabilityCertificate> {
    if !validation.contractive_ok {
        return Err(CertificateError::NotContractive);
    }
    if !(kappa > 0.0) {
        return Err(CertificateError::NoDissipation { kappa });
    }
    let gamma = gamma_min(sys, bounds)?;
    let len = sys.interval_length();
    let min = 2.0 * gamma * len;

    let mut best: Option<StabilityCertificate> = None;
    for &tau in tau_grid {
        let ctau = match c_tau(sys, bounds, tau) {
            Ok(v) => v,
            Err(CertificateError::WindowTooShort { .. }) => continue,
            Err(e) => return Err(e),
        };
        let rho = 1.0 / (1.0 + 2.0 * kappa / ctau);
        let omega = rho.ln() / tau;
        if best.as_ref().map(|b| omega < b.omega).unwrap_or(true) {
            best = Some(StabilityCertificate {
                gamma,
                kappa_tau: kappa_tau(sys, bounds)?,
                c_t: c_t(bounds),
                tau,
                c_tau: ctau,
                kappa,
                rho_tau: rho,
                omega,
                l: (1.0 / rho) * bounds.m_upper / bounds.m,
                amplitude_rate: omega / 2.0,
                assumptions_used: CertificateAssumptions {
                    contractive_evolution_family: true,
                },
            });
        }
    }
    let cert = best.ok_or(CertificateError::NoAdmissibleTau { min })?;
    cert.check_invariants(len)?;
    Ok(cert)
}
