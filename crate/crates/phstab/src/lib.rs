//! Simulation and stability certification for linear port-Hamiltonian PDE
//! systems on an interval,
//!
//! ```text
//!     d/dt x(t,z) = (P1 d/dz + P0)(H(t,z) x(t,z)) + K(t,z) x(t,z)
//! ```
//!
//! with matrix boundary conditions `W~_B ((Hx)(t,b), (Hx)(t,a)) = 0` and a
//! time-varying Hamiltonian density `H`. The crate provides:
//!
//! - [`expr`]: a small expression language for coefficient functions of
//!   `(t, zeta)`;
//! - [`algebra`]: a dense complex matrix kernel (Hermitian eigenvalues,
//!   definiteness, rank, the boundary-matrix algebra `W_B`, `W_B Sigma W_B^*`);
//! - [`model`]: system descriptions, presets (vibrating string, Timoshenko
//!   beam, transport network), hypothesis validation, and the boundary
//!   dissipation constant kappa;
//! - [`certificates`]: the explicit constant chain
//!   `(gamma, kappa_tau, c_T, C_tau, rho_tau, omega, L)` yielding a
//!   uniform exponential decay certificate for the weighted energy;
//! - [`solver`]: a method-of-lines simulator (central differences + RK4 +
//!   boundary trace projection) producing trajectories with weighted
//!   energies and boundary traces;
//! - [`transportnet`]: an exact characteristics solver for a two-line
//!   transport network with piecewise-constant speed schedules, the
//!   counterexample showing boundary dissipation without contractivity does
//!   not imply exponential stability;
//! - [`analysis`]: decay-rate fitting and verification of every energy
//!   inequality the certificates promise;
//! - [`config`], [`report`], [`cli`]: JSON config ingestion, report
//!   emission and the command-line entry points.

pub mod algebra;
pub mod analysis;
pub mod certificates;
pub mod cli;
pub mod config;
pub mod expr;
pub mod model;
pub mod report;
pub mod solver;
pub mod transportnet;

pub use algebra::{Definiteness, Mat, PsdVerdict};
pub use expr::ExprAst;
pub use model::{PHSystem, ValidationReport};
