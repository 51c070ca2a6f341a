//! Numerical laboratory for linear and quasilinear wave equations on
//! Schwarzschild black-hole backgrounds.
//!
//! The crate provides:
//!
//! * exterior Schwarzschild geometry in the charts used for local energy
//!   estimates (tortoise coordinate, rectangular charts, null frames),
//! * metric perturbations `g = g_S + h` with structural decay validators
//!   and the null-frame split of the perturbed wave operator,
//! * energy-momentum / multiplier calculus with numerical positivity audits
//!   of the Morawetz-type quadratic form,
//! * local-energy norms, Hardy and Klainerman-Sideris ratio checks, and
//!   weighted pointwise-decay diagnostics over dyadic spacetime regions,
//! * mode-reduced 1+1 evolution (linear and spherically symmetric
//!   quasilinear) with convergence and growth-exponent tooling.

pub mod error;
pub mod fd;
pub mod geometry;
pub mod multiplier;
pub mod norms;
pub mod perturbation;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
