//! Conserved and monotone quantities along trajectories: the first integral,
//! the Erbe-Tang/Pucci-Serrin P-function with its derivative identity, and
//! the integrals `M` (damping) and `J` (the weighted integral whose
//! finiteness characterizes membership of the ground state in L^{p+1}).
//!
//! Everything here consumes immutable trajectories; the heavy lifting is
//! recomputation from stored `(r, u, w, m)` so the checks are meaningful
//! (they would not be if they just echoed the integrator's own bookkeeping).

use serde::{Deserialize, Serialize};

use crate::integrator::Trajectory;
use crate::model::{self, eval_auxiliary, power_primitive, Parameters, RegimeTag};
use crate::quad;
use crate::{Error, Result};

/// Fraction-per-decade threshold of the plateau/divergence test.
pub const TREND_TOL: f64 = 0.01;

/// Verdict of the partial-integral trend analysis at log-spaced horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    /// Partial integrals settled to a plateau.
    Converging,
    /// Partial integrals keep drifting in one direction decade after decade.
    Diverging,
    /// Fewer than two decades of data, or mixed behaviour.
    Undetermined,
}

/// First-integral residual `H(rho) + M(r) + F(u) - F(xi)` recomputed at every
/// sample. Returns the series and its maximum absolute value.
pub fn first_integral_residual(traj: &Trajectory) -> (Vec<(f64, f64)>, f64) {
    let p = traj.params.p;
    let f_xi = power_primitive(traj.params.xi, p);
    let mut series = Vec::with_capacity(traj.samples.len());
    let mut max_abs = 0.0_f64;
    for s in &traj.samples {
        let e = model::h_from_w_eps(s.w, traj.eps) + s.m_partial + power_primitive(s.u, p) - f_xi;
        max_abs = max_abs.max(e.abs());
        series.push((s.r, e));
    }
    (series, max_abs)
}

/// P(r, u, rho) = r^N [H(rho) + F(u)] - N r^{N-1} Omega(rho) K(u).
///
/// The K-term is evaluated through the product form Omega * u/(p+1), which
/// vanishes at u = 0 and sidesteps the 0/0 of K there, consistent with the
/// value r^N H(rho) the identity needs at a zero of u.
pub fn eval_p(r: f64, u: f64, rho: f64, params: &Parameters) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::OutOfDomain(format!("P needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let aux = eval_auxiliary(rho)?;
    let n = params.n as f64;
    let f_u = power_primitive(u, params.p);
    Ok(r.powf(n) * (aux.h + f_u) - n * r.powf(n - 1.0) * aux.omega * u / (params.p + 1.0))
}

/// P evaluated from the reduced slope, exact arbitrarily close to rho = 1.
pub fn eval_p_from_w(r: f64, u: f64, w: f64, params: &Parameters) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let n = params.n as f64;
    let h = model::h_from_w(w);
    let omega = w.abs();
    r.powf(n) * (h + power_primitive(u, params.p))
        - n * r.powf(n - 1.0) * omega * u / (params.p + 1.0)
}

/// dP/dr = N r^{N-1} rho Omega(rho) L(rho); independent of u.
pub fn eval_dpdr(r: f64, rho: f64, params: &Parameters) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfDomain(format!("dP/dr needs r > 0, got {r}")));
    }
    let aux = eval_auxiliary(rho)?;
    let l = model::eval_l(rho, params.p, params.n)?;
    let n = params.n as f64;
    Ok(n * r.powf(n - 1.0) * rho * aux.omega * l)
}

fn dpdr_from_w(r: f64, w: f64, params: &Parameters) -> f64 {
    let n = params.n as f64;
    n * r.powf(n - 1.0)
        * model::rho_omega_from_w_eps(w, 1.0)
        * model::l_from_w(w, params.p, params.n)
}

/// Samples strictly before the first zero of u (the identity's domain),
/// further restricted to u > 0.
fn positive_arc(traj: &Trajectory) -> Vec<&crate::model::TrajectorySample> {
    let cutoff = traj.first_zero().unwrap_or(f64::INFINITY);
    traj.samples
        .iter()
        .take_while(|s| s.r < cutoff && s.u > 0.0)
        .collect()
}

/// P along the positive arc of a trajectory.
pub fn p_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    positive_arc(traj)
        .iter()
        .map(|s| (s.r, eval_p_from_w(s.r, s.u, s.w, &traj.params)))
        .collect()
}

/// Closed-form dP/dr along the positive arc.
pub fn dpdr_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    positive_arc(traj)
        .iter()
        .map(|s| (s.r, dpdr_from_w(s.r, s.w, &traj.params)))
        .collect()
}

/// Compares the finite-difference derivative of the P-series against the
/// closed form at interval midpoints; returns the maximum discrepancy
/// normalized by max |P|.
pub fn check_p_consistency(traj: &Trajectory) -> Result<f64> {
    if traj.eps != 1.0 {
        return Err(Error::Precondition(
            "the P identity applies to the mean curvature problem (eps = 1)".into(),
        ));
    }
    let arc = positive_arc(traj);
    if arc.len() < 3 {
        return Err(Error::Precondition(
            "P consistency needs at least 3 samples before the first zero".into(),
        ));
    }
    let ps: Vec<f64> = arc
        .iter()
        .map(|s| eval_p_from_w(s.r, s.u, s.w, &traj.params))
        .collect();
    let p_scale = ps
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    for i in 0..arc.len() - 1 {
        let (a, b) = (arc[i], arc[i + 1]);
        let fd = (ps[i + 1] - ps[i]) / (b.r - a.r);
        let r_mid = 0.5 * (a.r + b.r);
        let w_mid = 0.5 * (a.w + b.w);
        let closed = dpdr_from_w(r_mid, w_mid, &traj.params);
        worst = worst.max((fd - closed).abs() / p_scale);
    }
    Ok(worst)
}

/// Partial integrals against log-spaced horizons (decade anchors ending at
/// the last radius).
pub fn decade_partials(rs: &[f64], cumulative: &[f64]) -> Vec<(f64, f64)> {
    assert_eq!(rs.len(), cumulative.len());
    let mut out = Vec::new();
    if rs.len() < 2 {
        return out;
    }
    let r_hi = rs[rs.len() - 1];
    let r_lo = rs[0].max(f64::MIN_POSITIVE);
    let decades = (r_hi / r_lo).log10().floor().max(0.0) as usize;
    for j in (0..=decades.min(14)).rev() {
        let anchor = r_hi / 10f64.powi(j as i32);
        let idx = rs.partition_point(|&r| r <= anchor);
        if idx == 0 {
            continue;
        }
        out.push((anchor, cumulative[idx - 1]));
    }
    out
}

/// Plateau-or-drift classification of decade partials: drift of more than
/// `TREND_TOL` of the final magnitude per decade, with a consistent sign over
/// the last two decades, is divergence; staying within the tolerance twice is
/// a plateau; anything else (including < 2 usable decades) is undetermined.
pub fn classify_trend(partials: &[(f64, f64)]) -> Trend {
    if partials.len() < 3 {
        return Trend::Undetermined;
    }
    let last = partials[partials.len() - 1].1;
    let prev = partials[partials.len() - 2].1;
    let prev2 = partials[partials.len() - 3].1;
    let scale = last.abs().max(f64::MIN_POSITIVE);
    let d1 = prev - prev2;
    let d2 = last - prev;
    let tol = TREND_TOL * scale;
    if d1.abs() <= tol && d2.abs() <= tol {
        Trend::Converging
    } else if d1.abs() > tol && d2.abs() > tol && d1.signum() == d2.signum() {
        Trend::Diverging
    } else {
        Trend::Undetermined
    }
}

/// The integral J = Int r^{N-1} rho Omega L dr with its trend analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JIntegral {
    pub estimate: f64,
    /// (horizon, partial integral) at decade anchors.
    pub partials: Vec<(f64, f64)>,
    pub trend: Trend,
}

/// Quadrature of the J-integrand over a positive (ground-state-candidate)
/// trajectory. Sign-changing trajectories are rejected: the characterization
/// the integral feeds is stated for ground states.
pub fn integral_j(traj: &Trajectory) -> Result<JIntegral> {
    if traj.eps != 1.0 {
        return Err(Error::Precondition(
            "the J characterization applies to the mean curvature problem (eps = 1)".into(),
        ));
    }
    if traj.is_sign_changing() {
        return Err(Error::Precondition(
            "J is defined for ground-state candidates; this trajectory changes sign".into(),
        ));
    }
    let n = traj.params.n as f64;
    let rs: Vec<f64> = traj.samples.iter().map(|s| s.r).collect();
    let integrand: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            s.r.powf(n - 1.0)
                * model::rho_omega_from_w_eps(s.w, 1.0)
                * model::l_from_w(s.w, traj.params.p, traj.params.n)
        })
        .collect();
    let cum = quad::cumulative_trapezoid(&rs, &integrand);
    let partials = decade_partials(&rs, &cum);
    let trend = classify_trend(&partials);
    Ok(JIntegral {
        estimate: *cum.last().unwrap_or(&0.0),
        partials,
        trend,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignViolations {
    pub count: usize,
    pub locations: Vec<f64>,
}

/// Summary of every monitored quantity along one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub max_first_integral_residual: f64,
    #[serde(rename = "P_series")]
    pub p_series: Vec<(f64, f64)>,
    #[serde(rename = "dPdr_series")]
    pub dpdr_series: Vec<(f64, f64)>,
    /// Samples where the sign of dP/dr contradicts the regime's identity
    /// (absolute tolerance 1e-12).
    #[serde(rename = "dPdr_sign_violations")]
    pub dpdr_sign_violations: SignViolations,
    #[serde(rename = "M_total")]
    pub m_total: f64,
    /// None for sign-changing trajectories, where J is not defined.
    #[serde(rename = "J_estimate")]
    pub j_estimate: Option<f64>,
    #[serde(rename = "J_diverging")]
    pub j_diverging: Option<bool>,
    #[serde(rename = "max_H_observed")]
    pub max_h_observed: f64,
}

const SIGN_TOL: f64 = 1e-12;

/// Assemble the full diagnostics for one trajectory. The P- and J-based
/// entries are specific to the mean curvature problem and stay empty for
/// reference trajectories (eps != 1); the first integral and the H/M bounds
/// apply to the whole family.
pub fn diagnose(traj: &Trajectory) -> Result<DiagnosticsReport> {
    let (_, max_resid) = first_integral_residual(traj);
    let lorentz = traj.eps == 1.0;
    let p_ser = if lorentz { p_series(traj) } else { Vec::new() };
    let dp_ser = if lorentz { dpdr_series(traj) } else { Vec::new() };

    // Regime expectation on the sign of dP/dr over the positive arc: >= 0
    // subcritically (and critically), <= 0 supercritically wherever the
    // slope magnitude is below the root of L.
    let mut violations = SignViolations { count: 0, locations: Vec::new() };
    if traj.eps == 1.0 {
        match traj.params.regime() {
            RegimeTag::Subcritical | RegimeTag::Critical => {
                for &(r, v) in &dp_ser {
                    if v < -SIGN_TOL {
                        violations.count += 1;
                        violations.locations.push(r);
                    }
                }
            }
            RegimeTag::Supercritical => {
                let delta = model::l_zero(traj.params.p, traj.params.n)?;
                let arc = positive_arc(traj);
                for (s, &(r, v)) in arc.iter().zip(dp_ser.iter()) {
                    if s.rho <= delta && v > SIGN_TOL {
                        violations.count += 1;
                        violations.locations.push(r);
                    }
                }
            }
        }
    }

    let (j_estimate, j_diverging) = if !lorentz || traj.is_sign_changing() {
        (None, None)
    } else {
        let j = integral_j(traj)?;
        (Some(j.estimate), Some(j.trend == Trend::Diverging))
    };

    let max_h = traj
        .samples
        .iter()
        .map(|s| model::h_from_w_eps(s.w, traj.eps))
        .fold(0.0_f64, f64::max);

    Ok(DiagnosticsReport {
        max_first_integral_residual: max_resid,
        p_series: p_ser,
        dpdr_series: dp_ser,
        dpdr_sign_violations: violations,
        m_total: traj.m_total,
        j_estimate,
        j_diverging,
        max_h_observed: max_h,
    })
}
