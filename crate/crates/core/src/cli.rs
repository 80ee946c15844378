//! The `lm-shooter` command-line surface.
//!
//! Exit codes: 0 on success, 2 on usage errors (including violated
//! parameter invariants), 1 on runtime failures. Output is byte-identical
//! across identical invocations; all plotting is left to downstream tools,
//! the CLI only emits plot-ready CSV or JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classify::{classify, ClassifyCriteria};
use crate::decay::fit_tail_exponent;
use crate::diagnostics::diagnose;
use crate::export;
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::Parameters;
use crate::rescale::{closeness, map_from_eps, map_to_eps, solve_eps_family, solve_lane_emden, EpsFamilyParams};
use crate::sweep::{estimate_threshold, run_sweep, SweepConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lm-shooter",
    version,
    about = "Radial shooting analysis for the Lorentz-Minkowski mean curvature equation with a power nonlinearity",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the radial Cauchy problem and export the trajectory
    Integrate(IntegrateArgs),
    /// Integrate and classify (ground-state candidate / sign-changing)
    Classify(ClassifyArgs),
    /// First-integral, P-function and J-integral diagnostics for one run
    Diagnose(DiagnoseArgs),
    /// Integrate the radial Lane-Emden reference problem (unit datum)
    #[command(name = "lane-emden")]
    LaneEmden(LaneEmdenArgs),
    /// Verify the rescaling correspondence and the Lane-Emden limit
    #[command(name = "rescale-check")]
    RescaleCheck(RescaleCheckArgs),
    /// Fit the tail decay exponent against the theoretical band
    #[command(name = "decay-fit")]
    DecayFit(DecayFitArgs),
    /// Classify a grid of initial data (config file required)
    Sweep(SweepArgs),
    /// Bisect the ground-state/sign-changing boundary datum
    Threshold(ThresholdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Space dimension (>= 3)
    #[arg(short = 'N', long = "dim", value_name = "N")]
    n: u32,
    /// Exponent of the nonlinearity (> 1)
    #[arg(short = 'p', long = "exponent", value_name = "P")]
    p: f64,
    /// Initial datum u(0) (> 0)
    #[arg(long, value_name = "XI")]
    xi: f64,
}

impl ProblemArgs {
    fn parameters(&self) -> Result<Parameters> {
        Parameters::new(self.n, self.p, self.xi)
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Integration horizon
    #[arg(long, value_name = "R", default_value_t = 100.0)]
    rmax: f64,
    /// Starting offset radius [default: 1e-6 * xi^(-(p-1)/2)]
    #[arg(long, value_name = "H0")]
    h0: Option<f64>,
    /// Relative step-control tolerance
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Absolute step-control tolerance
    #[arg(long, default_value_t = 1e-12)]
    abs_tol: f64,
    /// Step budget
    #[arg(long, default_value_t = 5_000_000)]
    max_steps: usize,
    /// Event-location tolerance in r
    #[arg(long, default_value_t = 1e-12)]
    event_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            h0: self.h0,
            r_max: self.rmax,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_steps: self.max_steps,
            event_tol: self.event_tol,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output path, or '-' for stdout
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Args)]
struct IntegrateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Terminal value must drop below this fraction of xi for a candidate
    #[arg(long, default_value_t = 1e-2)]
    tail_threshold: f64,
    /// Also write the zero list as CSV (columns r,value)
    #[arg(long, value_name = "PATH")]
    zeros_out: Option<PathBuf>,
    /// Also write the envelope as CSV (columns r,value)
    #[arg(long, value_name = "PATH")]
    envelope_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct LaneEmdenArgs {
    /// Space dimension (>= 3)
    #[arg(short = 'N', long = "dim", value_name = "N")]
    n: u32,
    /// Exponent of the nonlinearity (> 1)
    #[arg(short = 'p', long = "exponent", value_name = "P")]
    p: f64,
    /// Family parameter: 0 is Lane-Emden, 1 the mean curvature problem
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct RescaleCheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Scaling parameter of the correspondence
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// eps values for the Lane-Emden comparison sequence
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-1, 1e-2, 1e-3, 1e-4])]
    eps_seq: Vec<f64>,
}

#[derive(Debug, Args)]
struct DecayFitArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Lower end of the fit window
    #[arg(long, value_name = "R")]
    wlo: f64,
    /// Upper end of the fit window
    #[arg(long, value_name = "R")]
    whi: f64,
    /// json: the fit report; csv: the resampled tail (log_r,log_u)
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep config document (JSON)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Override the dimension from the config
    #[arg(short = 'N', long = "dim")]
    n: Option<u32>,
    /// Override the exponent from the config
    #[arg(short = 'p', long = "exponent")]
    p: Option<f64>,
    /// Override the tail threshold from the config
    #[arg(long)]
    tail_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Space dimension (>= 3)
    #[arg(short = 'N', long = "dim", value_name = "N")]
    n: u32,
    /// Exponent of the nonlinearity (> 1)
    #[arg(short = 'p', long = "exponent", value_name = "P")]
    p: f64,
    /// Bracket low end (must classify as a ground-state candidate)
    #[arg(long)]
    lo: f64,
    /// Bracket high end (must classify as sign-changing)
    #[arg(long)]
    hi: f64,
    /// Bisection iterations
    #[arg(long, default_value_t = 20)]
    iters: u32,
    /// Base horizon; doubled while a datum stays undetermined
    #[arg(long, default_value_t = 1e3)]
    rmax: f64,
    /// Maximum horizon doublings per datum
    #[arg(long, default_value_t = 20)]
    max_doublings: u32,
    #[command(flatten)]
    out: OutArgs,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args())
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e @ (Error::InvalidParameter(_) | Error::Config(_) | Error::OutOfDomain(_))) => {
            eprintln!("error: {e}");
            eprintln!("{}", Cli::command().render_usage());
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn open_out(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(std::io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn write_json_to(path: &str, value: &impl Serialize) -> Result<()> {
    let mut out = open_out(path)?;
    export::write_json(&mut out, value)?;
    out.flush()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Integrate(a) => {
            let params = a.problem.parameters()?;
            let traj = integrate(&params, &a.solver.config())?;
            let mut out = open_out(&a.out.out)?;
            match a.format {
                Format::Csv => export::write_trajectory_csv(&mut out, &traj)?,
                Format::Json => export::write_json(&mut out, &traj)?,
            }
            out.flush()?;
            Ok(())
        }
        Command::Classify(a) => {
            let params = a.problem.parameters()?;
            if !(a.tail_threshold > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tail threshold must be > 0, got {}",
                    a.tail_threshold
                )));
            }
            let traj = integrate(&params, &a.solver.config())?;
            let criteria = ClassifyCriteria {
                horizon: Some(a.solver.rmax),
                tail_threshold: a.tail_threshold,
            };
            let c = classify(&traj, &criteria);
            if let Some(path) = &a.zeros_out {
                let rows: Vec<(f64, f64)> = c.zeros.iter().map(|&r| (r, 0.0)).collect();
                let mut out = open_out(&path.display().to_string())?;
                export::write_pairs_csv(&mut out, ("r", "value"), &rows)?;
                out.flush()?;
            }
            if let Some(path) = &a.envelope_out {
                let mut out = open_out(&path.display().to_string())?;
                export::write_pairs_csv(&mut out, ("r", "value"), &c.envelope)?;
                out.flush()?;
            }
            write_json_to(&a.out.out, &c)
        }
        Command::Diagnose(a) => {
            let params = a.problem.parameters()?;
            let traj = integrate(&params, &a.solver.config())?;
            let report = diagnose(&traj)?;
            write_json_to(&a.out.out, &report)
        }
        Command::LaneEmden(a) => {
            let fam = EpsFamilyParams::new(a.eps, a.n, a.p)?;
            let traj = if a.eps == 0.0 {
                solve_lane_emden(a.n, a.p, &a.solver.config())?
            } else {
                solve_eps_family(&fam, &a.solver.config())?
            };
            let mut out = open_out(&a.out.out)?;
            match a.format {
                Format::Csv => export::write_reference_trajectory_csv(&mut out, &traj)?,
                Format::Json => export::write_json(&mut out, &traj)?,
            }
            out.flush()?;
            Ok(())
        }
        Command::RescaleCheck(a) => {
            let report = rescale_check(&a)?;
            write_json_to(&a.out.out, &report)
        }
        Command::DecayFit(a) => {
            let params = a.problem.parameters()?;
            let traj = integrate(&params, &a.solver.config())?;
            let fit = fit_tail_exponent(&traj, (a.wlo, a.whi))?;
            match a.format {
                Format::Json => write_json_to(&a.out.out, &fit),
                Format::Csv => {
                    // plot-ready resampled tail
                    let mut rows = Vec::new();
                    let m = 200;
                    for i in 0..m {
                        let t = i as f64 / (m - 1) as f64;
                        let r = a.wlo * (a.whi / a.wlo).powf(t);
                        if let Some(u) = traj.u_at(r) {
                            if u > 0.0 {
                                rows.push((r.ln(), u.ln()));
                            }
                        }
                    }
                    let mut out = open_out(&a.out.out)?;
                    export::write_pairs_csv(&mut out, ("log_r", "log_u"), &rows)?;
                    out.flush()?;
                    Ok(())
                }
            }
        }
        Command::Sweep(a) => {
            let text = std::fs::read_to_string(&a.config)?;
            let mut cfg: SweepConfig =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
            if let Some(n) = a.n {
                cfg.n = n;
            }
            if let Some(p) = a.p {
                cfg.p = p;
            }
            if let Some(t) = a.tail_threshold {
                cfg.criteria.tail_threshold = t;
            }
            let report = run_sweep(&cfg)?;
            let mut out = open_out(&a.out.out)?;
            match a.format {
                Format::Csv => export::write_sweep_csv(&mut out, &report)?,
                Format::Json => export::write_json(&mut out, &report)?,
            }
            out.flush()?;
            Ok(())
        }
        Command::Threshold(a) => {
            if !(a.lo > 0.0) || !(a.hi > a.lo) {
                return Err(Error::InvalidParameter(format!(
                    "bracket must satisfy 0 < lo < hi, got ({}, {})",
                    a.lo, a.hi
                )));
            }
            Parameters::new(a.n, a.p, a.lo)?;
            let base = IntegratorConfig::with_r_max(a.rmax);
            let criteria = ClassifyCriteria::default();
            let report = estimate_threshold(
                a.n,
                a.p,
                (a.lo, a.hi),
                a.iters,
                &base,
                &criteria,
                a.max_doublings,
            )?;
            write_json_to(&a.out.out, &report)
        }
    }
}

#[derive(Debug, Serialize)]
struct RescaleCheckReport {
    lambda: f64,
    eps: f64,
    round_trip_max_deviation: f64,
    transformed_first_integral_residual: f64,
    lane_emden_window: (f64, f64),
    /// (eps, sup distance to Lane-Emden) over the comparison window.
    closeness_sequence: Vec<(f64, f64)>,
}

fn rescale_check(a: &RescaleCheckArgs) -> Result<RescaleCheckReport> {
    if !(a.lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", a.lambda)));
    }
    let params = a.problem.parameters()?;
    let cfg = a.solver.config();
    let traj = integrate(&params, &cfg)?;

    let mapped = map_to_eps(&traj, a.lambda)?;
    let back = map_from_eps(&mapped)?;
    let mut round_trip = 0.0_f64;
    for (s, b) in traj.samples.iter().zip(back.samples.iter()) {
        round_trip = round_trip
            .max((s.r - b.r).abs() / s.r.abs().max(1.0))
            .max((s.u - b.u).abs())
            .max((s.w - b.w).abs());
    }
    let (_, eps_resid) = crate::diagnostics::first_integral_residual(&mapped);

    let le = solve_lane_emden(params.n, params.p, &cfg)?;
    let window_end = le.first_zero().map(|z| 0.9 * z).unwrap_or(0.9 * cfg.r_max);
    let window = (0.0, window_end);
    let mut closeness_sequence = Vec::new();
    for &eps in &a.eps_seq {
        let fam = EpsFamilyParams::new(eps, params.n, params.p)?;
        let t_eps = solve_eps_family(&fam, &cfg)?;
        closeness_sequence.push((eps, closeness(&t_eps, &le, window)?));
    }
    Ok(RescaleCheckReport {
        lambda: a.lambda,
        eps: mapped.eps,
        round_trip_max_deviation: round_trip,
        transformed_first_integral_residual: eps_resid,
        lane_emden_window: window,
        closeness_sequence,
    })
}
