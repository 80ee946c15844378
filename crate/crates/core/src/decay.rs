//! Tail analysis of ground-state candidates: power-law exponent fitting on
//! log-spaced nodes, the theoretical decay band for the supercritical
//! regime, and a square-integrable-gradient proxy from partial integrals of
//! `r^{N-1} rho Omega`.
//!
//! For supercritical p the possible tails are `u ~ r^-(N-2)` (the gradient
//! lies in L^2) or a band between `r^-(2N/((N-1)(p+1)-2N))` below and
//! `r^-(2/(p-1))` above, with no faster decay than the upper exponent.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{classify_trend, decade_partials, Trend};
use crate::integrator::Trajectory;
use crate::model::{self, Parameters, RegimeTag};
use crate::quad;
use crate::{Error, Result};

/// Default half-width, in exponent units, around the band for the verdict.
pub const BAND_TOL: f64 = 0.05;

/// The three reference exponents of the supercritical tail analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBand {
    /// 2/(p-1): exponent of the upper bound on u (slowest admissible decay).
    pub alpha_upper_exponent: f64,
    /// 2N/((N-1)(p+1) - 2N): exponent of the lower bound on u.
    pub alpha_lower_exponent: f64,
    /// N-2: the decay rate of candidates with square-integrable gradient.
    pub alpha_d12: f64,
}

/// Band exponents for a supercritical instance; subcritical p has no such
/// tail structure and is rejected.
pub fn decay_band(params: &Parameters) -> Result<DecayBand> {
    if params.regime() != RegimeTag::Supercritical {
        return Err(Error::WrongRegime(format!(
            "decay bands are defined for p > (N+2)/(N-2); got p = {}, N = {}",
            params.p, params.n
        )));
    }
    let n = params.n as f64;
    let denom = (n - 1.0) * (params.p + 1.0) - 2.0 * n;
    // p supercritical forces (N-1)(p+1) > 2N, so the band is well defined
    assert!(denom > 0.0, "band denominator must be positive, got {denom}");
    Ok(DecayBand {
        alpha_upper_exponent: 2.0 / (params.p - 1.0),
        alpha_lower_exponent: 2.0 * n / denom,
        alpha_d12: n - 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandVerdict {
    /// Fitted exponent within the band (tolerance `BAND_TOL`).
    InBand,
    /// Fitted exponent near N-2, outside the band.
    D12Regime,
    OutOfBand,
    /// Window shorter than a decade, or u not positive across it.
    InsufficientTail,
}

/// A fitted tail exponent with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// -slope of log u against log r; None when the tail was unusable.
    pub alpha_hat: Option<f64>,
    /// Standard error of the fitted slope.
    pub alpha_stderr: Option<f64>,
    pub window: (f64, f64),
    /// RMS of the regression residual in log u.
    pub residual: f64,
    pub band: DecayBand,
    pub verdict: BandVerdict,
}

/// Number of equally-log-spaced nodes the fit is evaluated on.
const FIT_NODES: usize = 64;

/// Least-squares power-law fit of the tail over `window`, with the verdict
/// against the band of `decay_band`. Resampling to equally-log-spaced nodes
/// removes the bias the adaptive grid would otherwise introduce.
pub fn fit_tail_exponent(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let band = decay_band(&traj.params)?;
    let (r_lo, r_hi) = window;
    if !(r_lo > 0.0) || !(r_hi > r_lo) {
        return Err(Error::OutOfDomain(format!("bad fit window [{r_lo}, {r_hi}]")));
    }
    let insufficient = |band: DecayBand| DecayFit {
        alpha_hat: None,
        alpha_stderr: None,
        window,
        residual: 0.0,
        band,
        verdict: BandVerdict::InsufficientTail,
    };
    if r_hi / r_lo < 10.0
        || r_lo < traj.samples[0].r
        || r_hi > traj.last_sample().r * (1.0 + 1e-12)
    {
        return Ok(insufficient(band));
    }

    let mut xs = Vec::with_capacity(FIT_NODES);
    let mut ys = Vec::with_capacity(FIT_NODES);
    for i in 0..FIT_NODES {
        let t = i as f64 / (FIT_NODES - 1) as f64;
        let r = r_lo * (r_hi / r_lo).powf(t);
        match traj.u_at(r.min(traj.last_sample().r)) {
            Some(u) if u > 0.0 => {
                xs.push(r.ln());
                ys.push(u.ln());
            }
            _ => return Ok(insufficient(band)),
        }
    }

    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let alpha = -slope;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = my + slope * (x - mx);
            (y - pred) * (y - pred)
        })
        .sum();
    let residual = (rss / n).sqrt();
    let stderr = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };

    let verdict = if alpha >= band.alpha_upper_exponent - BAND_TOL
        && alpha <= band.alpha_lower_exponent + BAND_TOL
    {
        BandVerdict::InBand
    } else if (alpha - band.alpha_d12).abs() <= BAND_TOL {
        BandVerdict::D12Regime
    } else {
        BandVerdict::OutOfBand
    };
    Ok(DecayFit {
        alpha_hat: Some(alpha),
        alpha_stderr: Some(stderr),
        window,
        residual,
        band,
        verdict,
    })
}

/// Partial integrals of the gradient-energy integrand `r^{N-1} rho Omega` at
/// decade horizons, with the plateau test. A plateau is the numerical proxy
/// for the square-integrable-gradient alternative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct D12Proxy {
    pub partials: Vec<(f64, f64)>,
    pub trend: Trend,
}

pub fn d12_proxy(traj: &Trajectory) -> Result<D12Proxy> {
    if traj.is_sign_changing() {
        return Err(Error::Precondition(
            "the gradient-energy proxy applies to ground-state candidates".into(),
        ));
    }
    let n = traj.params.n as f64;
    let rs: Vec<f64> = traj.samples.iter().map(|s| s.r).collect();
    let integrand: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| s.r.powf(n - 1.0) * model::rho_omega_from_w_eps(s.w, traj.eps))
        .collect();
    let cum = quad::cumulative_trapezoid(&rs, &integrand);
    let partials = decade_partials(&rs, &cum);
    let trend = classify_trend(&partials);
    Ok(D12Proxy { partials, trend })
}

/// The bootstrap update `alpha <- alpha * p - 2` diverges exactly when the
/// seed exceeds 2/(p-1); returns whether it climbed past N/p and in how many
/// steps. A cheap cross-check that a fitted exponent above the band's upper
/// edge cannot persist.
pub fn bootstrap_exponent_diverges(alpha0: f64, p: f64, n: u32, max_steps: usize) -> (bool, usize) {
    let target = n as f64 / p;
    let mut alpha = alpha0;
    for step in 0..max_steps {
        if alpha > target {
            return (true, step);
        }
        let next = alpha * p - 2.0;
        if next <= alpha {
            return (false, step);
        }
        alpha = next;
    }
    (false, max_steps)
}
