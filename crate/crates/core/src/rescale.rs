//! The correspondence between the mean curvature equation and its rescaled
//! eps-family, whose eps -> 0 limit is the radial Lane-Emden equation.
//!
//! If u solves the mean curvature equation then
//! `u_l(r) = l^(-1/(2p)) u(l^(-(p-1)/(4p)) r)` solves the eps-family member
//! with `eps = l^((p+1)/(2p))`; conversely an eps-family solution w yields
//! `u(r) = eps^(1/(p+1)) w(eps^((p-1)/(2(p+1))) r)`. Both maps act on the
//! stored samples by pure scaling of `(r, u, w, m)`, so transformed
//! trajectories are exact up to rounding; no regridding is involved.

use crate::integrator::{integrate_system, Event, IntegratorConfig, RadialSystem, Trajectory};
use crate::model::{self, power_primitive, Parameters};
use crate::{Error, Result};

/// An eps-family instance; the initial datum of the reference problems is
/// fixed at 1.
#[derive(Debug, Clone, Copy)]
pub struct EpsFamilyParams {
    pub eps: f64,
    pub n: u32,
    pub p: f64,
}

impl EpsFamilyParams {
    pub fn new(eps: f64, n: u32, p: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
        }
        Parameters::new(n, p, 1.0)?;
        Ok(Self { eps, n, p })
    }
}

/// Integrate the radial Lane-Emden problem (eps = 0) with unit datum.
pub fn solve_lane_emden(n: u32, p: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let sys = RadialSystem { n, p, eps: 0.0 };
    integrate_system(&sys, 1.0, cfg)
}

/// Integrate an eps-family member with unit datum; eps = 0 coincides with
/// `solve_lane_emden` and eps = 1 with the mean curvature problem itself.
pub fn solve_eps_family(fam: &EpsFamilyParams, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let sys = RadialSystem { n: fam.n, p: fam.p, eps: fam.eps };
    integrate_system(&sys, 1.0, cfg)
}

fn scale_trajectory(
    traj: &Trajectory,
    eps_new: f64,
    scale_r: f64,
    scale_u: f64,
    scale_w: f64,
    scale_m: f64,
) -> Trajectory {
    let p = traj.params.p;
    let xi_new = scale_u * traj.params.xi;
    let f_xi_new = power_primitive(xi_new, p);
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            let (r, u, w, m) = (s.r * scale_r, s.u * scale_u, s.w * scale_w, s.m_partial * scale_m);
            crate::model::TrajectorySample {
                r,
                u,
                w,
                rho: model::slope_from_w_eps(w, eps_new).abs(),
                m_partial: m,
                e_resid: model::h_from_w_eps(w, eps_new) + m + power_primitive(u, p) - f_xi_new,
            }
        })
        .collect();
    let events = traj
        .events
        .iter()
        .map(|e| Event { kind: e.kind, r: e.r * scale_r, u: e.u * scale_u, w: e.w * scale_w })
        .collect();
    Trajectory {
        params: Parameters { n: traj.params.n, p, xi: xi_new },
        eps: eps_new,
        samples,
        events,
        termination: traj.termination.clone(),
        m_total: traj.m_total * scale_m,
        zeros: traj.zeros.iter().map(|z| z * scale_r).collect(),
    }
}

/// Map a mean curvature trajectory (eps = 1) to the eps-family member with
/// `eps = lambda^((p+1)/(2p))`.
pub fn map_to_eps(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    if traj.eps != 1.0 {
        return Err(Error::Precondition(format!(
            "map_to_eps expects a mean curvature trajectory (eps = 1), got eps = {}",
            traj.eps
        )));
    }
    let p = traj.params.p;
    let eps = lambda.powf((p + 1.0) / (2.0 * p));
    // sample radii dilate by the inverse of the argument scaling
    let scale_r = lambda.powf((p - 1.0) / (4.0 * p));
    let scale_u = lambda.powf(-1.0 / (2.0 * p));
    let scale_w = 1.0 / eps.sqrt();
    let scale_m = 1.0 / eps;
    Ok(scale_trajectory(traj, eps, scale_r, scale_u, scale_w, scale_m))
}

/// Map an eps-family trajectory (eps > 0) back to the mean curvature
/// equation; the resulting initial datum is `eps^(1/(p+1)) * datum`.
pub fn map_from_eps(traj: &Trajectory) -> Result<Trajectory> {
    let eps = traj.eps;
    if eps == 0.0 {
        return Err(Error::Precondition(
            "map_from_eps is degenerate at eps = 0 (the Lane-Emden limit)".into(),
        ));
    }
    let p = traj.params.p;
    let scale_u = eps.powf(1.0 / (p + 1.0));
    let scale_r = eps.powf(-(p - 1.0) / (2.0 * (p + 1.0)));
    let scale_w = eps.sqrt();
    let scale_m = eps;
    Ok(scale_trajectory(traj, 1.0, scale_r, scale_u, scale_w, scale_m))
}

/// Sup-norm distance of u between two trajectories over `interval`,
/// evaluated on the union of their sample radii.
pub fn closeness(t1: &Trajectory, t2: &Trajectory, interval: (f64, f64)) -> Result<f64> {
    let lo = interval.0.max(t1.samples[0].r).max(t2.samples[0].r);
    let hi = interval
        .1
        .min(t1.last_sample().r)
        .min(t2.last_sample().r);
    if hi < lo {
        return Err(Error::Incompatible(format!(
            "no overlap between the sampled ranges inside [{}, {}]",
            interval.0, interval.1
        )));
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
    let mut sup = 0.0_f64;
    for &r in &grid {
        if let (Some(u1), Some(u2)) = (t1.u_at(r), t2.u_at(r)) {
            sup = sup.max((u1 - u2).abs());
        }
    }
    Ok(sup)
}
