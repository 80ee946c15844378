//! Initial-datum sweeps: classify a grid of data in parallel, estimate the
//! ground-state/sign-changing boundary by bisection, and certify candidates
//! through the small-slope criterion (sup rho below the root of L forces the
//! monotone P-function argument through, so no zero can occur).
//!
//! Rows are independent work items; the report preserves grid order, so a
//! given config always produces identical bytes. `LM_SHOOTER_THREADS` caps
//! the worker count (default: machine parallelism).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{classify, count_intersections, ClassifyCriteria, Verdict};
use crate::decay::fit_tail_exponent;
use crate::diagnostics::{integral_j, Trend};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::model::{l_zero, Parameters, RegimeTag};
use crate::{Error, Result};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "LM_SHOOTER_THREADS";

/// The grid of initial data, explicit or geometric.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiGrid {
    Explicit(Vec<f64>),
    Geometric { lo: f64, hi: f64, count: usize },
}

impl XiGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let xs = match self {
            XiGrid::Explicit(v) => v.clone(),
            XiGrid::Geometric { lo, hi, count } => {
                if !(*lo > 0.0) || !(hi > lo) || *count < 2 {
                    return Err(Error::Config(format!(
                        "geometric grid needs 0 < lo < hi and count >= 2, got lo={lo} hi={hi} count={count}"
                    )));
                }
                (0..*count)
                    .map(|i| lo * (hi / lo).powf(i as f64 / (*count - 1) as f64))
                    .collect()
            }
        };
        if xs.is_empty() {
            return Err(Error::Config("empty xi grid".into()));
        }
        if !xs.windows(2).all(|ab| ab[1] > ab[0]) || !(xs[0] > 0.0) {
            return Err(Error::Config("xi grid must be strictly increasing and positive".into()));
        }
        Ok(xs)
    }
}

/// Per-datum integration horizon.
///
/// `Auto { scale }` uses `scale * max(1, xi^{-(p-1)/2})`: for small data the
/// dynamics are a stretched copy of the Lane-Emden flow and unfold on radii
/// growing like that power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonSchedule {
    Fixed(f64),
    Auto { scale: f64 },
    Explicit(Vec<f64>),
}

impl Default for HorizonSchedule {
    fn default() -> Self {
        HorizonSchedule::Auto { scale: 100.0 }
    }
}

impl HorizonSchedule {
    pub fn r_max(&self, idx: usize, xi: f64, p: f64) -> Result<f64> {
        match self {
            HorizonSchedule::Fixed(r) => Ok(*r),
            HorizonSchedule::Auto { scale } => {
                Ok(scale * 1.0_f64.max(xi.powf(-(p - 1.0) / 2.0)))
            }
            HorizonSchedule::Explicit(v) => v.get(idx).copied().ok_or_else(|| {
                Error::Config(format!("horizon list shorter than the xi grid (index {idx})"))
            }),
        }
    }
}

fn default_true() -> bool {
    true
}

/// A full sweep description, deserializable from a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: u32,
    pub p: f64,
    pub xi_grid: XiGrid,
    #[serde(default)]
    pub horizons: HorizonSchedule,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub criteria: ClassifyCriteria,
    /// Sign-changing rows may stop at their first zero; the verdict is
    /// already decided there.
    #[serde(default = "default_true")]
    pub stop_at_first_zero: bool,
}

impl SweepConfig {
    pub fn new(n: u32, p: f64, xi_grid: XiGrid) -> Self {
        Self {
            n,
            p,
            xi_grid,
            horizons: HorizonSchedule::default(),
            integrator: IntegratorConfig::default(),
            criteria: ClassifyCriteria::default(),
            stop_at_first_zero: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub xi: f64,
    pub verdict: Verdict,
    #[serde(rename = "R0")]
    pub r0: Option<f64>,
    pub n_zeros: usize,
    pub max_rho: f64,
    pub alpha_hat: Option<f64>,
    #[serde(rename = "J_trend")]
    pub j_trend: Option<Trend>,
    pub certified: Option<bool>,
    /// Why the verdict is Undetermined, or a per-row failure.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalBoundary {
    pub largest_ground_state: Option<f64>,
    pub smallest_sign_changing: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionCheck {
    pub xi_ground_state: f64,
    pub xi_sign_changing: f64,
    pub intersections: usize,
    pub tangency_suspected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub empirical_boundary: EmpiricalBoundary,
    /// Intersection counts for pairs where a sign-changing solution starts
    /// below a ground-state candidate (the configuration in which the graphs
    /// must cross).
    pub intersection_checks: Vec<IntersectionCheck>,
}

fn build_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("failed to build thread pool: {e}")))
}

/// Integrate and classify one datum; never panics on per-row failure.
fn run_row(cfg: &SweepConfig, idx: usize, xi: f64) -> SweepRow {
    let mut row = SweepRow {
        xi,
        verdict: Verdict::Undetermined,
        r0: None,
        n_zeros: 0,
        max_rho: f64::NAN,
        alpha_hat: None,
        j_trend: None,
        certified: None,
        note: None,
    };
    let mut inner = || -> Result<()> {
        let params = Parameters::new(cfg.n, cfg.p, xi)?;
        let r_max = cfg.horizons.r_max(idx, xi, cfg.p)?;
        let int_cfg = IntegratorConfig {
            r_max,
            stop_at_first_zero: cfg.stop_at_first_zero,
            ..cfg.integrator.clone()
        };
        let traj = integrate(&params, &int_cfg)?;
        let criteria = ClassifyCriteria {
            horizon: Some(r_max),
            tail_threshold: cfg.criteria.tail_threshold,
        };
        let c = classify(&traj, &criteria);
        row.verdict = c.verdict;
        row.r0 = c.first_zero;
        row.n_zeros = c.zeros.len();
        row.max_rho = traj.max_rho();
        row.note = c.reason;
        if c.verdict == Verdict::GroundStateCandidate {
            let r_hi = traj.last_sample().r;
            if let Ok(fit) = fit_tail_exponent(&traj, (r_hi / 100.0, r_hi)) {
                row.alpha_hat = fit.alpha_hat;
            }
            if let Ok(j) = integral_j(&traj) {
                row.j_trend = Some(j.trend);
            }
        }
        if params.regime() == RegimeTag::Supercritical {
            let delta = l_zero(cfg.p, cfg.n)?;
            row.certified = Some(row.max_rho < delta);
        }
        Ok(())
    };
    if let Err(e) = inner() {
        row.note = Some(format!("row failed: {e}"));
    }
    row
}

/// Run the sweep: every datum is integrated and classified independently;
/// the report is deterministic for a given config.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let xis = cfg.xi_grid.values()?;
    Parameters::new(cfg.n, cfg.p, xis[0])?;
    let pool = build_pool()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        xis.par_iter()
            .enumerate()
            .map(|(idx, &xi)| run_row(cfg, idx, xi))
            .collect()
    });

    let largest_ground_state = rows
        .iter()
        .filter(|r| r.verdict == Verdict::GroundStateCandidate)
        .map(|r| r.xi)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let smallest_sign_changing = rows
        .iter()
        .filter(|r| r.verdict == Verdict::SignChanging)
        .map(|r| r.xi)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));

    // Graph-crossing checks on pairs where the precondition (sign-changing
    // datum below a candidate's) holds. Re-integrates without the early
    // stop so the curves overlap.
    let mut intersection_checks = Vec::new();
    let gs_rows: Vec<f64> = rows
        .iter()
        .filter(|r| r.verdict == Verdict::GroundStateCandidate)
        .map(|r| r.xi)
        .collect();
    let sc_rows: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.verdict == Verdict::SignChanging)
        .map(|(i, r)| (i, r.xi))
        .collect();
    for &gs_xi in &gs_rows {
        for &(sc_idx, sc_xi) in sc_rows.iter().filter(|&&(_, s)| s < gs_xi) {
            let pair = || -> Result<IntersectionCheck> {
                let r_max = cfg.horizons.r_max(sc_idx, sc_xi, cfg.p)?;
                let int_cfg = IntegratorConfig { r_max, ..cfg.integrator.clone() };
                let gs = integrate(&Parameters::new(cfg.n, cfg.p, gs_xi)?, &int_cfg)?;
                let sc = integrate(&Parameters::new(cfg.n, cfg.p, sc_xi)?, &int_cfg)?;
                let c = count_intersections(&gs, &sc)?;
                Ok(IntersectionCheck {
                    xi_ground_state: gs_xi,
                    xi_sign_changing: sc_xi,
                    intersections: c.count,
                    tangency_suspected: c.tangency_suspected,
                })
            };
            if let Ok(check) = pair() {
                intersection_checks.push(check);
            }
        }
    }

    Ok(SweepReport {
        rows,
        empirical_boundary: EmpiricalBoundary { largest_ground_state, smallest_sign_changing },
        intersection_checks,
    })
}

/// Outcome of the bisection for the boundary datum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub bracket: (f64, f64),
    /// Every classification made along the way, in evaluation order.
    pub evaluations: Vec<(f64, Verdict)>,
    /// Data that stayed undetermined even after horizon escalation.
    pub undetermined: Vec<f64>,
    /// Set when the evaluations, sorted by datum, are not
    /// candidate-below / sign-changing-above; no threshold is then claimed.
    pub non_monotone: bool,
}

/// Checks the sorted evaluations for the monotone structure
/// (candidates strictly below every sign-changing datum).
pub fn monotone_structure(evaluations: &[(f64, Verdict)]) -> bool {
    let mut sorted: Vec<&(f64, Verdict)> = evaluations.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let largest_gs = sorted
        .iter()
        .filter(|e| e.1 == Verdict::GroundStateCandidate)
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let smallest_sc = sorted
        .iter()
        .filter(|e| e.1 == Verdict::SignChanging)
        .map(|e| e.0)
        .fold(f64::INFINITY, f64::min);
    largest_gs < smallest_sc
}

/// Classify one datum, doubling the horizon (up to `max_doublings`) while
/// the verdict stays undetermined.
fn classify_with_escalation(
    n: u32,
    p: f64,
    xi: f64,
    base: &IntegratorConfig,
    criteria: &ClassifyCriteria,
    max_doublings: u32,
) -> Result<Verdict> {
    let params = Parameters::new(n, p, xi)?;
    let base_r_max = base.r_max;
    for k in 0..=max_doublings {
        let r_max = base_r_max * 2f64.powi(k as i32);
        let cfg = IntegratorConfig { r_max, stop_at_first_zero: true, ..base.clone() };
        let traj = integrate(&params, &cfg)?;
        let crit = ClassifyCriteria {
            horizon: Some(r_max),
            tail_threshold: criteria.tail_threshold,
        };
        let c = classify(&traj, &crit);
        if c.verdict != Verdict::Undetermined {
            return Ok(c.verdict);
        }
    }
    Ok(Verdict::Undetermined)
}

/// Bisect the classification boundary inside a verified bracket
/// (`lo` must classify as a candidate and `hi` as sign-changing).
pub fn estimate_threshold(
    n: u32,
    p: f64,
    bracket: (f64, f64),
    iters: u32,
    base: &IntegratorConfig,
    criteria: &ClassifyCriteria,
    max_doublings: u32,
) -> Result<ThresholdReport> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Precondition(format!("bad bracket ({lo}, {hi})")));
    }
    let mut evaluations = Vec::new();
    let mut undetermined = Vec::new();

    let v_lo = classify_with_escalation(n, p, lo, base, criteria, max_doublings)?;
    evaluations.push((lo, v_lo));
    if v_lo != Verdict::GroundStateCandidate {
        return Err(Error::Precondition(format!(
            "bracket low end xi = {lo} classified as {v_lo}, need GroundStateCandidate"
        )));
    }
    let v_hi = classify_with_escalation(n, p, hi, base, criteria, max_doublings)?;
    evaluations.push((hi, v_hi));
    if v_hi != Verdict::SignChanging {
        return Err(Error::Precondition(format!(
            "bracket high end xi = {hi} classified as {v_hi}, need SignChanging"
        )));
    }

    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let v = classify_with_escalation(n, p, mid, base, criteria, max_doublings)?;
        evaluations.push((mid, v));
        match v {
            Verdict::GroundStateCandidate => lo = mid,
            Verdict::SignChanging => hi = mid,
            Verdict::Undetermined => {
                undetermined.push(mid);
                // cannot decide which side to shrink; stop honestly
                break;
            }
        }
    }
    let non_monotone = !monotone_structure(&evaluations);
    Ok(ThresholdReport { bracket: (lo, hi), evaluations, undetermined, non_monotone })
}

/// The small-slope ground-state certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub max_rho: f64,
    /// Root of L: slopes below it keep dP/dr negative.
    pub delta: f64,
    pub certified: bool,
}

/// Certify a supercritical trajectory: sup rho below the root of L is the
/// sufficient condition for ground-state behaviour.
pub fn ground_state_certificate(traj: &Trajectory) -> Result<Certificate> {
    if traj.params.regime() != RegimeTag::Supercritical {
        return Err(Error::WrongRegime(format!(
            "the certificate needs p > (N+2)/(N-2); got p = {}, N = {}",
            traj.params.p, traj.params.n
        )));
    }
    let delta = l_zero(traj.params.p, traj.params.n)?;
    let max_rho = traj.max_rho();
    Ok(Certificate { max_rho, delta, certified: max_rho < delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_construction() {
        let g = XiGrid::Geometric { lo: 0.01, hi: 10.0, count: 30 };
        let xs = g.values().unwrap();
        assert_eq!(xs.len(), 30);
        assert!((xs[0] - 0.01).abs() < 1e-15);
        assert!((xs[29] - 10.0).abs() < 1e-12);
        // constant ratio
        let q = xs[1] / xs[0];
        for pair in xs.windows(2) {
            assert!((pair[1] / pair[0] - q).abs() < 1e-12);
        }
        assert!(XiGrid::Explicit(vec![0.2, 0.1]).values().is_err());
        assert!(XiGrid::Explicit(vec![]).values().is_err());
    }

    #[test]
    fn auto_horizon_schedule() {
        let h = HorizonSchedule::Auto { scale: 100.0 };
        // xi >= 1 pins the horizon at the scale
        assert_eq!(h.r_max(0, 2.0, 3.0).unwrap(), 100.0);
        // xi = 0.01, p = 3: 100 / 0.01 = 1e4
        assert!((h.r_max(0, 0.01, 3.0).unwrap() - 1e4).abs() < 1e-9);
        // explicit lists must cover the grid
        let e = HorizonSchedule::Explicit(vec![10.0]);
        assert!(e.r_max(1, 1.0, 3.0).is_err());
    }

    #[test]
    fn subcritical_sweep_is_all_sign_changing() {
        let cfg = SweepConfig::new(3, 3.0, XiGrid::Geometric { lo: 0.1, hi: 2.0, count: 6 });
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 6);
        for row in &report.rows {
            assert_eq!(row.verdict, Verdict::SignChanging, "xi = {}", row.xi);
            assert!(row.r0.is_some());
            assert!(row.certified.is_none());
        }
        assert!(report.empirical_boundary.largest_ground_state.is_none());
    }

    #[test]
    fn supercritical_small_data_certify() {
        let mut cfg =
            SweepConfig::new(3, 7.0, XiGrid::Explicit(vec![0.05, 0.1]));
        cfg.horizons = HorizonSchedule::Auto { scale: 1e7 };
        let report = run_sweep(&cfg).unwrap();
        for row in &report.rows {
            assert_eq!(row.verdict, Verdict::GroundStateCandidate, "xi={} note={:?}", row.xi, row.note);
            assert_eq!(row.certified, Some(true));
            assert_eq!(row.j_trend, Some(Trend::Diverging));
            let alpha = row.alpha_hat.unwrap();
            assert!(alpha > 0.2 && alpha < 0.7, "alpha {alpha}");
        }
    }

    #[test]
    fn certified_data_never_classify_as_sign_changing_on_any_horizon() {
        use crate::classify::{classify, ClassifyCriteria, Verdict};
        let params = Parameters::new(3, 7.0, 0.5).unwrap();
        for r_max in [50.0, 500.0, 5000.0] {
            let traj = integrate(&params, &IntegratorConfig::with_r_max(r_max)).unwrap();
            assert!(ground_state_certificate(&traj).unwrap().certified);
            let c = classify(&traj, &ClassifyCriteria::default());
            assert_ne!(c.verdict, Verdict::SignChanging, "horizon {r_max}");
        }
    }

    #[test]
    fn sign_changing_rows_always_exceed_the_certificate_slope() {
        // the certificate implication (certified => candidate) in
        // contrapositive form: a trajectory with a zero must have pushed
        // sup rho past the root of L before crossing, even when the row
        // stops at its first zero
        let mut cfg = SweepConfig::new(3, 7.0, XiGrid::Explicit(vec![0.05, 30.0]));
        cfg.horizons = HorizonSchedule::Fixed(100.0);
        let report = run_sweep(&cfg).unwrap();
        let delta = l_zero(7.0, 3).unwrap();
        assert_eq!(report.rows[1].verdict, Verdict::SignChanging);
        assert_eq!(report.rows[1].certified, Some(false));
        assert!(report.rows[1].max_rho >= delta, "max_rho {}", report.rows[1].max_rho);
        assert_eq!(report.rows[0].certified, Some(true));
        assert_ne!(report.rows[0].verdict, Verdict::SignChanging);
        // this mixed report also exercises the crossing check: the
        // sign-changing datum sits below no candidate, so none is recorded
        assert!(report.intersection_checks.is_empty());
    }

    #[test]
    fn sweep_rows_survive_failures() {
        // horizon list too short: rows past it report the failure
        let mut cfg = SweepConfig::new(3, 3.0, XiGrid::Explicit(vec![0.5, 1.0]));
        cfg.horizons = HorizonSchedule::Explicit(vec![20.0]);
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.rows[0].verdict, Verdict::SignChanging);
        assert_eq!(report.rows[1].verdict, Verdict::Undetermined);
        assert!(report.rows[1].note.as_ref().unwrap().contains("row failed"));
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig::new(3, 3.0, XiGrid::Geometric { lo: 0.5, hi: 2.0, count: 4 });
        let a = serde_json::to_string(&run_sweep(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn certificate_matches_closed_form_root() {
        let params = Parameters::new(3, 7.0, 0.05).unwrap();
        let traj = integrate(&params, &IntegratorConfig::with_r_max(100.0)).unwrap();
        let cert = ground_state_certificate(&traj).unwrap();
        assert!((cert.delta - 4.0 * 3.0_f64.sqrt() / 13.0).abs() < 1e-12);
        assert!(cert.certified);

        let big = integrate(
            &Parameters::new(3, 7.0, 50.0).unwrap(),
            &IntegratorConfig::with_r_max(60.0),
        )
        .unwrap();
        let cert = ground_state_certificate(&big).unwrap();
        assert!(!cert.certified);
        assert!(cert.max_rho >= cert.delta);

        let sub = integrate(
            &Parameters::new(3, 3.0, 1.0).unwrap(),
            &IntegratorConfig::with_r_max(10.0),
        )
        .unwrap();
        assert!(matches!(ground_state_certificate(&sub), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn monotone_structure_detection() {
        use Verdict::*;
        let good = vec![(0.1, GroundStateCandidate), (5.0, SignChanging), (2.0, GroundStateCandidate)];
        assert!(monotone_structure(&good));
        let bad = vec![(0.1, GroundStateCandidate), (5.0, SignChanging), (7.0, GroundStateCandidate)];
        assert!(!monotone_structure(&bad));
        // undetermined entries never break the structure
        let with_und = vec![(0.1, GroundStateCandidate), (1.0, Undetermined), (5.0, SignChanging)];
        assert!(monotone_structure(&with_und));
    }

    #[test]
    fn threshold_bisection_arithmetic() {
        // real bracket, few iterations: the bracket halves each time
        let base = IntegratorConfig::with_r_max(3e3);
        let crit = ClassifyCriteria::default();
        let report = estimate_threshold(3, 7.0, (1.0, 50.0), 4, &base, &crit, 16).unwrap();
        let width = report.bracket.1 - report.bracket.0;
        assert!(width <= 49.0 / 16.0 + 1e-9, "width {width}");
        assert!(!report.non_monotone);
        assert!(report.undetermined.is_empty());
        // the boundary lies between the verified bracket ends
        assert!(report.bracket.0 >= 1.0 && report.bracket.1 <= 50.0);
    }

    #[test]
    fn threshold_rejects_bad_bracket() {
        let base = IntegratorConfig::with_r_max(100.0);
        let crit = ClassifyCriteria::default();
        // both ends sign-changing
        let err = estimate_threshold(3, 7.0, (30.0, 50.0), 3, &base, &crit, 2);
        assert!(matches!(err, Err(Error::Precondition(_))));
        let err = estimate_threshold(3, 7.0, (5.0, 2.0), 3, &base, &crit, 2);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
