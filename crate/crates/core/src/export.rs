//! Deterministic CSV and JSON writers.
//!
//! CSV dialect: comma-separated, '.' decimal point, '\n' line endings,
//! UTF-8. Floats are written with 17 significant digits, which round-trips
//! f64 exactly; missing optional values are empty fields. JSON goes through
//! serde with the field names of the type definitions.

use std::io::Write;

use serde::Serialize;

use crate::diagnostics::{self, Trend};
use crate::integrator::Trajectory;
use crate::model;
use crate::sweep::SweepReport;
use crate::Result;

/// 17-significant-digit scientific notation; exact round trip for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn trend_name(t: Trend) -> &'static str {
    match t {
        Trend::Converging => "Converging",
        Trend::Diverging => "Diverging",
        Trend::Undetermined => "Undetermined",
    }
}

/// Trajectory of the mean curvature problem with the monotonicity function
/// in the last column.
pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    writeln!(out, "r,u,up,w,rho,E_resid,P")?;
    for s in &traj.samples {
        let up = model::slope_from_w_eps(s.w, traj.eps);
        let p = diagnostics::eval_p_from_w(s.r, s.u, s.w, &traj.params);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(s.r),
            fmt_f64(s.u),
            fmt_f64(up),
            fmt_f64(s.w),
            fmt_f64(s.rho),
            fmt_f64(s.e_resid),
            fmt_f64(p)
        )?;
    }
    Ok(())
}

/// Trajectory of a reference problem (Lane-Emden or the eps-family), where
/// the Lorentz monotonicity function does not apply.
pub fn write_reference_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    writeln!(out, "r,u,up,w,rho,E_resid")?;
    for s in &traj.samples {
        let up = model::slope_from_w_eps(s.w, traj.eps);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(s.r),
            fmt_f64(s.u),
            fmt_f64(up),
            fmt_f64(s.w),
            fmt_f64(s.rho),
            fmt_f64(s.e_resid)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: &mut W, report: &SweepReport) -> Result<()> {
    writeln!(out, "xi,verdict,R0,n_zeros,max_rho,alpha_hat,J_trend,certified")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(row.xi),
            row.verdict,
            fmt_opt(row.r0),
            row.n_zeros,
            fmt_f64(row.max_rho),
            fmt_opt(row.alpha_hat),
            row.j_trend.map(trend_name).unwrap_or(""),
            row.certified.map(|c| if c { "true" } else { "false" }).unwrap_or("")
        )?;
    }
    Ok(())
}

/// Two-column CSV, used for zero lists, envelopes and log-log tail samples.
pub fn write_pairs_csv<W: Write>(
    out: &mut W,
    header: (&str, &str),
    rows: &[(f64, f64)],
) -> Result<()> {
    writeln!(out, "{},{}", header.0, header.1)?;
    for (a, b) in rows {
        writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*b))?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
