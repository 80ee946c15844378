//! Closed-form building blocks: the auxiliary functions of the Lorentz
//! operator, the power nonlinearity, the L-function whose sign drives the
//! Erbe-Tang/Pucci-Serrin monotonicity identity, and the core parameter and
//! sample types.
//!
//! Two parametrizations of the slope coexist throughout the crate.
//! `rho = |u'|` lives in `[0, 1)` and is the variable the classical formulas
//! are written in. `w = u' / sqrt(1 - u'^2)` is unconstrained; it is what the
//! integrator evolves, and the `*_from_w` evaluators compute the same
//! quantities directly from `w` without ever forming `rho`. That matters for
//! large initial data, where `rho` comes within one ulp of 1 while every
//! quantity of interest stays perfectly representable in `w`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exponents within this distance of (N+2)/(N-2) are tagged critical.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Problem instance: dimension N >= 3, exponent p > 1, initial datum xi > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub n: u32,
    pub p: f64,
    pub xi: f64,
}

impl Parameters {
    pub fn new(n: u32, p: f64, xi: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("N must be >= 3, got {n}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")));
        }
        Ok(Self { n, p, xi })
    }

    /// (N+2)/(N-2), the dichotomy pivot for the exponent.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.n).expect("validated at construction")
    }

    pub fn regime(&self) -> RegimeTag {
        let pc = self.critical_exponent();
        if (self.p - pc).abs() < CRITICAL_TOL {
            RegimeTag::Critical
        } else if self.p < pc {
            RegimeTag::Subcritical
        } else {
            RegimeTag::Supercritical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    Subcritical,
    Critical,
    Supercritical,
}

/// One integration node.
///
/// `w` is the reduced slope; for the mean curvature problem it equals
/// `u'/sqrt(1-u'^2)`, for the eps-family the analogous `u'/sqrt(1-eps*u'^2)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub r: f64,
    pub u: f64,
    pub w: f64,
    /// |u'|, derived from `w`. Saturates at 1.0 in f64 once |w| > ~1e8; use
    /// the `*_from_w` evaluators rather than this field for diagnostics.
    pub rho: f64,
    /// Running value of (N-1) * Integral_0^r rho*Omega/s ds.
    pub m_partial: f64,
    /// First-integral residual at this node.
    pub e_resid: f64,
}

/// The operator's auxiliary functions at a slope magnitude `rho` in [0, 1).
///
/// A = 1/sqrt(1-rho^2), Omega = rho*A, G = 1 - 1/A, H = A - 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Auxiliary {
    pub a: f64,
    pub omega: f64,
    pub g: f64,
    pub h: f64,
}

pub fn eval_auxiliary(rho: f64) -> Result<Auxiliary> {
    check_rho(rho)?;
    let s = (1.0 - rho * rho).sqrt();
    let a = 1.0 / s;
    Ok(Auxiliary {
        a,
        omega: rho / s,
        g: 1.0 - s,
        h: a - 1.0,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::OutOfDomain(format!("rho must be in [0, 1), got {rho}")));
    }
    Ok(())
}

/// f(u) = |u|^(p-1) u.
pub fn power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(p - 1.0) * u
    }
}

/// F(u) = |u|^(p+1)/(p+1), the primitive of `power` vanishing at 0.
pub fn power_primitive(u: f64, p: f64) -> f64 {
    u.abs().powf(p + 1.0) / (p + 1.0)
}

/// Values of the nonlinearity at `u`: f, F, and K = F/f.
///
/// K collapses to u/(p+1) away from zero and has no value at u = 0 (0/0);
/// consumers that need the product Omega*K at u = 0 use the fact that it
/// vanishes there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    pub f: f64,
    pub f_primitive: f64,
    pub k: Option<f64>,
}

pub fn eval_nonlinearity(u: f64, p: f64) -> Result<Nonlinearity> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    let k = if u == 0.0 { None } else { Some(u / (p + 1.0)) };
    Ok(Nonlinearity {
        f: power(u, p),
        f_primitive: power_primitive(u, p),
        k,
    })
}

/// L(rho) = 1/(p+1) - sqrt(1-rho^2)/(1+sqrt(1-rho^2)) + 1/N.
///
/// The sign of dP/dr equals the sign of L; L does not depend on u. It is
/// nondecreasing in rho, positive everywhere for subcritical p and negative
/// on an initial interval [0, delta] for supercritical p.
pub fn eval_l(rho: f64, p: f64, n: u32) -> Result<f64> {
    check_rho(rho)?;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("N must be >= 3, got {n}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    Ok(1.0 / (p + 1.0) - s / (1.0 + s) + 1.0 / n as f64)
}

/// (N+2)/(N-2) for N >= 3.
pub fn critical_exponent(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::OutOfDomain(format!("critical exponent needs N >= 3, got {n}")));
    }
    Ok((n as f64 + 2.0) / (n as f64 - 2.0))
}

/// The root delta of L(delta) = 0 for supercritical p, found by bisection.
///
/// L(0) < 0 < lim_{rho->1} L exactly when p > (N+2)/(N-2), so the root
/// exists and is unique (L is strictly increasing wherever it moves).
pub fn l_zero(p: f64, n: u32) -> Result<f64> {
    let pc = critical_exponent(n)?;
    if p <= pc + CRITICAL_TOL {
        return Err(Error::WrongRegime(format!(
            "the L-function has no positive root unless p > (N+2)/(N-2) = {pc}, got p = {p}"
        )));
    }
    eval_l(0.0, p, n)?;
    let mut lo = 0.0_f64;
    let mut hi = 1.0 - 1e-16;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval_l(mid, p, n)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// --- evaluation in reduced-slope variables -------------------------------
//
// With w = u'/sqrt(1 - u'^2) one has A = sqrt(1 + w^2), Omega = |w|,
// rho*Omega = w^2/A and H = A - 1 = w^2/(A + 1); the last form avoids the
// cancellation of A - 1 at small w. The eps-variants replace w^2 by eps*w^2
// inside A and divide H by eps, which collapses to the same stable formula
// H_eps = w^2/(A_eps + 1); eps = 0 degenerates to the Laplacian case
// H_0 = w^2/2, and eps = 1 recovers the Lorentz forms.

pub fn a_from_w_eps(w: f64, eps: f64) -> f64 {
    (1.0 + eps * w * w).sqrt()
}

/// H(rho(w)) for the eps-scaled operator, stable for every eps >= 0.
pub fn h_from_w_eps(w: f64, eps: f64) -> f64 {
    w * w / (1.0 + a_from_w_eps(w, eps))
}

/// Signed slope u' = w / sqrt(1 + eps w^2).
pub fn slope_from_w_eps(w: f64, eps: f64) -> f64 {
    w / a_from_w_eps(w, eps)
}

/// rho * Omega = w^2 / sqrt(1 + eps w^2).
pub fn rho_omega_from_w_eps(w: f64, eps: f64) -> f64 {
    w * w / a_from_w_eps(w, eps)
}

pub fn a_from_w(w: f64) -> f64 {
    a_from_w_eps(w, 1.0)
}

pub fn h_from_w(w: f64) -> f64 {
    h_from_w_eps(w, 1.0)
}

pub fn rho_from_w(w: f64) -> f64 {
    w.abs() / a_from_w(w)
}

/// L evaluated from the reduced slope: sqrt(1-rho^2) = 1/A, so the middle
/// term is 1/(A+1).
pub fn l_from_w(w: f64, p: f64, n: u32) -> f64 {
    1.0 / (p + 1.0) - 1.0 / (1.0 + a_from_w(w)) + 1.0 / n as f64
}
