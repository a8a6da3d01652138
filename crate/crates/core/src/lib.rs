//! Optimal investment for an insurer operating in two currency markets.
//!
//! The insurer's surplus is a drifted Brownian motion (diffusion
//! approximation of the Cramer-Lundberg model). Wealth can be invested in a
//! domestic risk-free asset and either a foreign risky asset (converted at an
//! exchange rate whose mean growth rate is modulated by an Ornstein-Uhlenbeck
//! process) or a domestic risky asset. Expected exponential utility of
//! terminal wealth is maximized.
//!
//! The crate provides:
//! - [`market`]: parameter types, validation, and the three market variants;
//! - [`closed_form`]: the analytic value functions, optimal strategies and
//!   the Riccati/linear/quadrature coefficient functions K, L, J;
//! - [`oracle`]: independent RK4 / adaptive-Simpson / finite-difference
//!   machinery used only to cross-check the closed forms;
//! - [`mc`]: a seeded, reproducible Monte Carlo engine for the controlled
//!   surplus dynamics;
//! - [`analysis`]: market comparisons, figure-data reproduction and the
//!   verification suite backing the `fxinsure` CLI.

pub mod analysis;
pub mod closed_form;
pub mod market;
pub mod mc;
pub mod oracle;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter-set invariant failed; the message names the first
    /// violated constraint, e.g. "theta must be > 0".
    #[error("{0}")]
    Validation(String),
    #[error("grid must contain at least 2 points and end at T={expected}, got end {got}")]
    BadGrid { expected: f64, got: f64 },
    #[error("grid mismatch between coefficient solves")]
    GridMismatch,
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("non-finite state at t={t} (step {step})")]
    NonFiniteState { t: f64, step: usize },
    #[error("non-finite state in path {path} at step {step}")]
    PathBlowUp { path: u64, step: usize },
    #[error("quadrature tolerance {tol} not reached at max recursion depth")]
    QuadratureDepth { tol: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
