//! Shooting-method analysis of radial solutions for the Lorentz-Minkowski
//! mean curvature equation with a pure power nonlinearity,
//!
//! ```text
//! div( grad(u) / sqrt(1 - |grad(u)|^2) ) + |u|^(p-1) u = 0   on R^N,  N >= 3.
//! ```
//!
//! The radial ansatz turns this into a singular Cauchy problem in the radius
//! `r`, integrated here in reduced-slope variables that keep the spacelike
//! constraint `|u'| < 1` structural instead of numerical. On top of the
//! integrator the crate provides:
//!
//! - [`model`]: closed-form auxiliary functions of the operator, the power
//!   nonlinearity, the Pucci-Serrin L-function and the critical exponent;
//! - [`integrator`]: adaptive embedded Runge-Kutta 5(4) with event detection
//!   for zeros of `u` and `u'`;
//! - [`diagnostics`]: first-integral conservation, the Erbe-Tang/Pucci-Serrin
//!   P-function and its derivative identity, the integrals `M` and `J`;
//! - [`classify`]: ground-state-candidate vs sign-changing dichotomy, zero
//!   lists, envelopes and graph-intersection counting;
//! - [`rescale`]: the Lane-Emden reference problems and the eps-family
//!   correspondence between the two equations;
//! - [`decay`]: tail-exponent fitting against the theoretical decay bands;
//! - [`sweep`]: parallel initial-datum sweeps, threshold bisection and the
//!   small-slope ground-state certificate;
//! - [`cli`]: the `lm-shooter` command-line surface with CSV/JSON export.

// Validation uses the negated-comparison idiom (`!(x > 0.0)`) on purpose:
// it rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod decay;
pub mod diagnostics;
pub mod export;
pub mod integrator;
pub mod model;
pub mod quad;
pub mod rescale;
pub mod sweep;

pub use integrator::{integrate, IntegratorConfig, Termination, Trajectory};
pub use model::{Parameters, RegimeTag, TrajectorySample};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a type invariant (N >= 3, p > 1, xi > 0, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An argument is outside the mathematical domain of an operation.
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    /// Operation requires a different sub/supercritical regime.
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    /// Two trajectories cannot be compared.
    #[error("incompatible trajectories: {0}")]
    Incompatible(String),
    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
