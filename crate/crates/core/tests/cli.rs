use std::fs;

use proptest::prelude::*;
use stokes_core::analysis::{eoc, ConvergenceReport, ErrorTable, LevelRecord, NormFamily, Variant};
use stokes_core::cli::{parse_levels, run, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};
use stokes_core::report::{format_sci, parse_csv, to_csv, CSV_HEADER};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(args.iter().copied(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("convergence") && out.contains("verify"));
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        &["--solver-tol", "1e-3"][..],
        &["--levels", "3..1"],
        &["--variant", "neither"],
        &["--format", "xml"],
        &["--time-points", "2"],
        &["--error-points", "9"],
        &["--frobnicate"],
        &["--config", "/nonexistent/stokes.cfg"],
    ] {
        let (code, out, err) = invoke(args);
        assert_eq!(code, EXIT_CONFIG, "{args:?}");
        assert!(out.is_empty());
        assert!(err.starts_with("error:"), "{err}");
    }
}

#[test]
fn unwritable_output_is_rejected_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let target = file.join("sub");
    let (code, _, err) = invoke(&["convergence", "--levels", "0", "--output", target.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("plain-file"), "{err}");
}

#[test]
fn config_file_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(
        &cfg,
        "# coarse study\ncommand = convergence\nlevels = 0..1\nvariant = collocation\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();

    let (code, out, err) = invoke(&["--config", path]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(err.is_empty());
    assert_eq!(out.lines().count(), 1 + 3 * 2);
    assert!(out.lines().skip(1).all(|l| l.starts_with("collocation,")));

    let (code, out, err) = invoke(&["--config", path, "--variant", "interpolation"]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("warning") && err.contains("variant"), "{err}");
    assert!(out.lines().skip(1).all(|l| l.starts_with("interpolation,")));

    fs::write(&cfg, "levels: 0..1\n").unwrap();
    let (code, _, err) = invoke(&["--config", path]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("line 1"));
}

#[test]
fn convergence_writes_one_csv_per_family_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("tables");
    let (code, out, err) = invoke(&["convergence", "--levels", "0..2", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.is_empty());
    for variant in ["collocation", "interpolation"] {
        for family in ["L2", "lbar2", "l2plus"] {
            let text = fs::read_to_string(out_dir.join(format!("{variant}_{family}.csv"))).unwrap();
            assert!(text.starts_with(CSV_HEADER));
            assert!(!text.contains('\r'));
            let rows = parse_csv(&text).unwrap();
            assert_eq!(rows.iter().map(|r| r.level).collect::<Vec<_>>(), vec![0, 1, 2]);
            assert_eq!(rows[0].eocs, [None; 3]);
            for w in rows.windows(2) {
                for q in 0..3 {
                    let recomputed = eoc(w[0].errors[q], w[1].errors[q]).unwrap();
                    assert!((recomputed - w[1].eocs[q].unwrap()).abs() <= 0.005);
                }
            }
        }
    }
}

#[test]
fn markdown_output_has_stacked_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = invoke(&[
        "convergence",
        "--levels",
        "0..1",
        "--variant",
        "interpolation",
        "--format",
        "markdown",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let md = fs::read_to_string(dir.path().join("interpolation.md")).unwrap();
    assert_eq!(md.matches("|---|").count(), 3);
    assert!(!dir.path().join("collocation.md").exists());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let args = ["convergence", "--levels", "0..2"];
    let (c1, a, _) = invoke(&args);
    let (c2, b, _) = invoke(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a.as_bytes(), b.as_bytes());
}

#[test]
fn run_command_reports_each_level() {
    let (code, out, _) = invoke(&[
        "run",
        "--levels",
        "0..1",
        "--load",
        "lobatto",
        "--collocation",
        "recurrence",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("level,tau,h"));
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("1,"));
}

#[test]
fn verify_command_and_fault_hook() {
    let (code, out, _) = invoke(&["verify", "--seed", "42"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.lines().count() >= 10 && out.lines().all(|l| l.starts_with("PASS ")));
    let (again, out2, _) = invoke(&["verify", "--seed", "42"]);
    assert_eq!((again, out2), (EXIT_OK, out));

    let (code, out, err) = invoke(&["verify", "--inject-fault"]);
    assert_eq!(code, EXIT_INVARIANT);
    assert!(out.contains("FAIL divergence-freeness"));
    assert!(err.contains("divergence-freeness"));
}

fn synthetic(errors: &[f64]) -> ConvergenceReport {
    ConvergenceReport {
        variant: Variant::Collocation,
        records: errors
            .iter()
            .enumerate()
            .map(|(level, &e)| LevelRecord {
                level,
                tau: 2f64.powi(-(level as i32)),
                h: 0.25 * 2f64.sqrt() * 2f64.powi(-(level as i32)),
                errors: ErrorTable {
                    values: [[e, 2.0 * e, 0.5 * e]; 3],
                },
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn sci_format_round_trips_to_ten_decimals(m in 1.0f64..10.0, e in -300i32..300) {
        let v = m * 10f64.powi(e);
        let s = format_sci(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-10 * v.abs());
        let (mant, exp) = s.split_once('e').unwrap();
        prop_assert_eq!(mant.len(), 12);
        prop_assert!(exp.starts_with('+') || exp.starts_with('-'));
        prop_assert!(exp.len() >= 3);
    }

    #[test]
    fn csv_eoc_round_trip(errors in prop::collection::vec(1e-8f64..1.0, 1..6)) {
        let report = synthetic(&errors);
        for family in NormFamily::ALL {
            let rows = parse_csv(&to_csv(&report, family)).unwrap();
            prop_assert_eq!(rows.len(), errors.len());
            for w in rows.windows(2) {
                for q in 0..3 {
                    let recomputed = eoc(w[0].errors[q], w[1].errors[q]).unwrap();
                    prop_assert!((recomputed - w[1].eocs[q].unwrap()).abs() <= 0.005);
                }
            }
        }
    }

    #[test]
    fn level_ranges_parse(lo in 0usize..=8, len in 0usize..=8) {
        let hi = (lo + len).min(8);
        prop_assert_eq!(parse_levels(&format!("{lo}..{hi}")).unwrap(), lo..=hi);
        prop_assert_eq!(parse_levels(&format!("{lo}..={hi}")).unwrap(), lo..=hi);
        if lo < hi {
            let reversed = format!("{hi}..{lo}");
            prop_assert!(parse_levels(&reversed).is_err());
        }
    }
}
