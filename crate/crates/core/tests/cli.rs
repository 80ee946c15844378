//! End-to-end tests of the command-line surface: exit codes, exact CSV
//! schemas, JSON round trips and byte-level determinism.

use std::fs;
use std::path::Path;

use lm_shooter::classify::Classification;
use lm_shooter::cli::run_from;
use lm_shooter::decay::DecayFit;
use lm_shooter::diagnostics::DiagnosticsReport;
use lm_shooter::sweep::ThresholdReport;

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("lm-shooter").chain(args.iter().copied()))
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn integrate_writes_the_pinned_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let code = run(&[
        "integrate", "-N", "3", "-p", "7", "--xi", "0.1", "--rmax", "1e4",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,u,up,w,rho,E_resid,P");
    let first = lines.next().unwrap();
    assert_eq!(first.split(',').count(), 7);
    // every numeric field parses back to f64
    for field in first.split(',') {
        field.parse::<f64>().unwrap();
    }
}

#[test]
fn usage_errors_exit_2() {
    // N below 3 violates a parameter invariant
    assert_eq!(run(&["integrate", "-N", "2", "-p", "3", "--xi", "1"]), 2);
    // p must exceed 1
    assert_eq!(run(&["integrate", "-N", "3", "-p", "0.5", "--xi", "1"]), 2);
    // xi must be positive
    assert_eq!(run(&["classify", "-N", "3", "-p", "3", "--xi", "-1"]), 2);
    // unknown flag and missing subcommand are clap usage errors
    assert_eq!(run(&["integrate", "--no-such-flag"]), 2);
    assert_eq!(run(&[]), 2);
    // help is not an error
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["integrate", "--help"]), 0);
}

#[test]
fn io_failures_exit_1() {
    let code = run(&[
        "integrate", "-N", "3", "-p", "3", "--xi", "1", "--rmax", "1",
        "--out", "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let code = run(&[
            "integrate", "-N", "3", "-p", "3", "--xi", "1", "--rmax", "20",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn classify_json_round_trips_and_exports_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let zeros = dir.path().join("zeros.csv");
    let env = dir.path().join("env.csv");
    let code = run(&[
        "classify", "-N", "3", "-p", "3", "--xi", "1", "--rmax", "100",
        "--out", out.to_str().unwrap(),
        "--zeros-out", zeros.to_str().unwrap(),
        "--envelope-out", env.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let text = read(&out);
    let c: Classification = serde_json::from_str(&text).unwrap();
    assert!(!c.zeros.is_empty());
    // parsing back and re-serializing gives the same document
    assert_eq!(
        serde_json::to_string(&c).unwrap(),
        serde_json::to_string(&serde_json::from_str::<Classification>(&text).unwrap()).unwrap()
    );

    for (path, n_rows) in [(&zeros, c.zeros.len()), (&env, c.envelope.len())] {
        let text = read(path);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "r,value");
        assert_eq!(lines.count(), n_rows);
    }
}

#[test]
fn diagnose_emits_the_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let code = run(&[
        "diagnose", "-N", "3", "-p", "7", "--xi", "0.5", "--rmax", "50",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    let rep: DiagnosticsReport = serde_json::from_str(&text).unwrap();
    assert!(rep.max_first_integral_residual < 1e-8);
    // the JSON uses the upper-case field names of the type definitions
    for key in ["P_series", "dPdr_series", "dPdr_sign_violations", "M_total", "J_estimate", "J_diverging", "max_H_observed"] {
        assert!(text.contains(key), "missing key {key}");
    }
}

#[test]
fn lane_emden_csv_has_no_p_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("le.csv");
    let code = run(&[
        "lane-emden", "-N", "3", "-p", "5", "--rmax", "20",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    assert!(text.starts_with("r,u,up,w,rho,E_resid\n"));
}

#[test]
fn decay_fit_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("fit.json");
    let code = run(&[
        "decay-fit", "-N", "3", "-p", "7", "--xi", "1", "--rmax", "2e4",
        "--wlo", "1e2", "--whi", "1e4",
        "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let fit: DecayFit = serde_json::from_str(&read(&json)).unwrap();
    let alpha = fit.alpha_hat.unwrap();
    assert!(alpha > 0.2 && alpha < 0.7, "alpha {alpha}");

    let csv = dir.path().join("tail.csv");
    let code = run(&[
        "decay-fit", "-N", "3", "-p", "7", "--xi", "1", "--rmax", "2e4",
        "--wlo", "1e2", "--whi", "1e4", "--format", "csv",
        "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(read(&csv).starts_with("log_r,log_u\n"));
}

#[test]
fn sweep_requires_and_reads_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{
            "n": 3,
            "p": 3.0,
            "xi_grid": { "geometric": { "lo": 0.5, "hi": 2.0, "count": 4 } }
        }"#,
    )
    .unwrap();
    let out = dir.path().join("report.csv");
    let code = run(&[
        "sweep", "--config", cfg.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "xi,verdict,R0,n_zeros,max_rho,alpha_hat,J_trend,certified"
    );
    assert_eq!(lines.count(), 4);
    // every row of this subcritical sweep changes sign
    for line in text.lines().skip(1) {
        assert!(line.contains("SignChanging"), "row: {line}");
    }

    // malformed config is a usage error
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{").unwrap();
    assert_eq!(run(&["sweep", "--config", bad.to_str().unwrap()]), 2);

    // partial solver/criteria settings fill in from the defaults
    let partial = dir.path().join("partial.json");
    fs::write(
        &partial,
        r#"{
            "n": 3, "p": 3.0,
            "xi_grid": { "explicit": [1.0] },
            "horizons": { "fixed": 20.0 },
            "integrator": { "rel_tol": 1e-8 },
            "criteria": { "tail_threshold": 0.02 }
        }"#,
    )
    .unwrap();
    let out2 = dir.path().join("partial.csv");
    assert_eq!(
        run(&["sweep", "--config", partial.to_str().unwrap(), "--out", out2.to_str().unwrap()]),
        0
    );
    assert!(read(&out2).contains("SignChanging"));
}

#[test]
fn sweep_json_mirror_and_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{ "n": 3, "p": 3.0, "xi_grid": { "explicit": [0.5, 1.0] } }"#,
    )
    .unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::env::set_var(lm_shooter::sweep::THREADS_ENV, "1");
    let code = run(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "json", "--out", a.to_str().unwrap()]);
    std::env::remove_var(lm_shooter::sweep::THREADS_ENV);
    assert_eq!(code, 0);
    let code = run(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "json", "--out", b.to_str().unwrap()]);
    assert_eq!(code, 0);
    // the thread cap must not change the output
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["empirical_boundary"]["smallest_sign_changing"].is_number());
}

#[test]
fn threshold_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let code = run(&[
        "threshold", "-N", "3", "-p", "7", "--lo", "1", "--hi", "50",
        "--iters", "2", "--rmax", "3e3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let rep: ThresholdReport = serde_json::from_str(&read(&out)).unwrap();
    assert!(rep.bracket.0 >= 1.0 && rep.bracket.1 <= 50.0);
    assert!(rep.bracket.1 - rep.bracket.0 <= 49.0 / 4.0 + 1e-9);
    assert!(!rep.non_monotone);
    // a bad bracket is a runtime precondition failure, not a usage error
    let code = run(&[
        "threshold", "-N", "3", "-p", "7", "--lo", "30", "--hi", "50",
        "--iters", "1", "--rmax", "200",
        "--out", dir.path().join("t2.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn rescale_check_reports_the_correspondence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let code = run(&[
        "rescale-check", "-N", "3", "-p", "3", "--xi", "1", "--rmax", "20",
        "--lambda", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert!(v["round_trip_max_deviation"].as_f64().unwrap() <= 1e-10);
    assert!(v["transformed_first_integral_residual"].as_f64().unwrap() <= 1e-8);
    let seq = v["closeness_sequence"].as_array().unwrap();
    assert_eq!(seq.len(), 4);
    // distances shrink along the default eps sequence
    let d: Vec<f64> = seq.iter().map(|e| e[1].as_f64().unwrap()).collect();
    assert!(d.windows(2).all(|ab| ab[1] < ab[0]), "distances {d:?}");
    let eps = v["eps"].as_f64().unwrap();
    assert!((eps - 2.0_f64.powf(2.0 / 3.0)).abs() < 1e-12);
}
