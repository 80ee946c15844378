//! The ground-state / sign-changing dichotomy made operational.
//!
//! Every global trajectory either keeps one sign and vanishes at infinity or
//! crosses zero; on a finite horizon only the crossing is conclusive, so the
//! positive verdict is "candidate": positive, decreasing, and already small
//! compared with the initial datum. Everything else is reported as
//! undetermined with a reason rather than guessed.

use serde::{Deserialize, Serialize};

use crate::integrator::{EventKind, Termination, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    GroundStateCandidate,
    SignChanging,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::GroundStateCandidate => "GroundStateCandidate",
            Verdict::SignChanging => "SignChanging",
            Verdict::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

/// Knobs of the dichotomy test.
///
/// `tail_threshold` is the fraction of the initial datum below which the
/// terminal value must have dropped before a positive decreasing run counts
/// as a ground-state candidate. `horizon`, when set, additionally demands
/// that the trajectory actually reached that radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyCriteria {
    pub horizon: Option<f64>,
    pub tail_threshold: f64,
}

impl Default for ClassifyCriteria {
    fn default() -> Self {
        Self { horizon: None, tail_threshold: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evidence {
    /// Radius actually reached.
    pub horizon: f64,
    /// u at the last sample.
    pub tail_value: f64,
    /// log-log slope of u over the last decade, when the tail is positive.
    pub tail_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Zeros of u, strictly increasing; empty for candidates.
    pub zeros: Vec<f64>,
    #[serde(rename = "first_zero")]
    pub first_zero: Option<f64>,
    /// (r, |u|) at the interior critical points.
    pub envelope: Vec<(f64, f64)>,
    pub evidence: Evidence,
    /// Why the verdict is Undetermined, when it is.
    pub reason: Option<String>,
}

fn tail_slope(traj: &Trajectory) -> Option<f64> {
    let last = traj.last_sample();
    if last.u <= 0.0 {
        return None;
    }
    let r_hi = last.r;
    let r_lo = r_hi / 10.0;
    let u_lo = traj.u_at(r_lo)?;
    if u_lo <= 0.0 {
        return None;
    }
    Some((last.u.ln() - u_lo.ln()) / (r_hi.ln() - r_lo.ln()))
}

/// Apply the dichotomy to an integrated trajectory.
pub fn classify(traj: &Trajectory, criteria: &ClassifyCriteria) -> Classification {
    let last = traj.last_sample();
    let evidence = Evidence {
        horizon: last.r,
        tail_value: last.u,
        tail_slope: tail_slope(traj),
    };
    let zeros = find_zeros(traj);
    let env = envelope(traj);

    let undetermined = |reason: String| Classification {
        verdict: Verdict::Undetermined,
        zeros: zeros.clone(),
        first_zero: zeros.first().copied(),
        envelope: env.clone(),
        evidence: evidence.clone(),
        reason: Some(reason),
    };

    if let Termination::GuardTripped(why) = &traj.termination {
        return undetermined(format!("integration guard tripped: {why}"));
    }
    if !zeros.is_empty() {
        return Classification {
            verdict: Verdict::SignChanging,
            first_zero: zeros.first().copied(),
            zeros,
            envelope: env,
            evidence,
            reason: None,
        };
    }
    if traj.termination == Termination::StepBudgetExhausted {
        return undetermined("step budget exhausted before the horizon".into());
    }
    if let Some(h) = criteria.horizon {
        if last.r < h * (1.0 - 1e-9) {
            return undetermined(format!("horizon {h} not reached (stopped at {})", last.r));
        }
    }
    if traj.samples.iter().any(|s| s.u <= 0.0) {
        // no refined zero event but the samples dipped: should not happen
        return undetermined("u reached zero without a refined crossing".into());
    }
    let xi = traj.params.xi;
    let monotone = traj
        .samples
        .windows(2)
        .all(|ab| ab[1].u <= ab[0].u + 1e-12 * xi)
        && env.is_empty();
    if !monotone {
        return undetermined("u is positive but not monotonically decreasing".into());
    }
    if last.u >= criteria.tail_threshold * xi {
        return undetermined(format!(
            "tail value {} has not dropped below {} * xi",
            last.u, criteria.tail_threshold
        ));
    }
    Classification {
        verdict: Verdict::GroundStateCandidate,
        zeros,
        first_zero: None,
        envelope: env,
        evidence,
        reason: None,
    }
}

/// Refined zero radii, strictly increasing.
pub fn find_zeros(traj: &Trajectory) -> Vec<f64> {
    traj.zeros.clone()
}

/// (r, |u|) at the interior critical points (refined zeros of u'). The
/// magnitudes decrease strictly: at a critical point the first integral
/// reads F(|u|) = F(xi) - M(r) and M only grows.
pub fn envelope(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.events
        .iter()
        .filter(|e| e.kind == EventKind::ZeroOfUPrime)
        .map(|e| (e.r, e.u.abs()))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionCount {
    pub count: usize,
    /// Points where the curves came within interpolation error without a
    /// sign change; counted as 0 crossings but worth flagging.
    pub tangency_suspected: bool,
    /// The radial window actually compared.
    pub window: (f64, f64),
}

/// Counts transversal crossings of two graphs over the window
/// `[0, min(first zeros, common horizon)]`, restricted to the region where
/// both solutions are positive.
pub fn count_intersections(t1: &Trajectory, t2: &Trajectory) -> Result<IntersectionCount> {
    if t1.params.n != t2.params.n || t1.params.p != t2.params.p || t1.eps != t2.eps {
        return Err(Error::Incompatible(format!(
            "(N, p, eps) = ({}, {}, {}) vs ({}, {}, {})",
            t1.params.n, t1.params.p, t1.eps, t2.params.n, t2.params.p, t2.eps
        )));
    }
    let lo = t1.samples[0].r.max(t2.samples[0].r);
    let hi = [
        t1.first_zero().unwrap_or(f64::INFINITY),
        t2.first_zero().unwrap_or(f64::INFINITY),
        t1.last_sample().r,
        t2.last_sample().r,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if hi <= lo {
        return Ok(IntersectionCount { count: 0, tangency_suspected: false, window: (lo, lo) });
    }

    let mut grid: Vec<f64> = t1
        .samples
        .iter()
        .chain(t2.samples.iter())
        .map(|s| s.r)
        .filter(|&r| r >= lo && r <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut count = 0;
    let mut tangency = false;
    let mut prev_sign = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut diffs = Vec::with_capacity(grid.len());
    for &r in &grid {
        let (Some(u1), Some(u2)) = (t1.u_at(r), t2.u_at(r)) else { continue };
        if u1 <= 0.0 || u2 <= 0.0 {
            continue;
        }
        scale = scale.max(u1.abs().max(u2.abs()));
        diffs.push(u1 - u2);
    }
    // When the window is closed by a refined zero of one solution, the sign
    // of the difference there is known exactly (that solution vanishes while
    // the other is still positive), even though no sample sits at that
    // radius.
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    if t2.first_zero().map(|z| near(z, hi)).unwrap_or(false) {
        if let Some(u1) = t1.u_at(hi.min(t1.last_sample().r)) {
            if u1 > 0.0 {
                scale = scale.max(u1);
                diffs.push(u1);
            }
        }
    } else if t1.first_zero().map(|z| near(z, hi)).unwrap_or(false) {
        if let Some(u2) = t2.u_at(hi.min(t2.last_sample().r)) {
            if u2 > 0.0 {
                scale = scale.max(u2);
                diffs.push(-u2);
            }
        }
    }
    let tangency_tol = 1e-7 * scale.max(f64::MIN_POSITIVE);
    for &d in &diffs {
        if d.abs() <= tangency_tol {
            tangency = true;
            continue;
        }
        let sign = d.signum();
        if prev_sign != 0.0 && sign != prev_sign {
            count += 1;
        }
        prev_sign = sign;
    }
    Ok(IntersectionCount { count, tangency_suspected: tangency, window: (lo, hi) })
}
