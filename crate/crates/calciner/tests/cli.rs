//! End-to-end tests of the command-line binary: files written, table
//! schemas, stdout summaries, error reporting, and the exit-code contract
//! (0 success, 2 configuration or usage, 3 numerical or output).

use std::path::Path;
use std::process::{Command, Output};

use calciner::output::{STEADY_HEADER, TIME_SERIES_HEADER};
use calciner::scenario;

fn baseline_config() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/baseline.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calciner"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no exit code (killed?)")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr should be UTF-8")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn simulate_writes_the_documented_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--config",
        baseline_config(),
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "0.5",
        "--samples",
        "5",
        "simulate",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("simulated 0.5 s"), "stdout: {}", stdout(&out));

    let table = read(dir.path(), "time_series.csv");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], TIME_SERIES_HEADER);
    // 5 samples x 20 cells, and no row for the initial state.
    assert_eq!(lines.len(), 1 + 5 * 20);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), TIME_SERIES_HEADER.split(',').count());
    assert_eq!(first[0], "0.1", "first sample, not t = 0");
    assert_eq!(first[1], "1", "cells are numbered from 1");
    assert_eq!(first[2].parse::<f64>().unwrap(), 2.5, "first cell center of 20 over 100 m");
    for row in &lines[1..] {
        for (column, value) in row.split(',').enumerate().skip(2) {
            let parsed: f64 = value
                .parse()
                .unwrap_or_else(|e| panic!("column {column} value {value:?}: {e}"));
            assert!(parsed.is_finite());
        }
    }

    let report: toml::Table = toml::from_str(&read(dir.path(), "run_report.toml")).unwrap();
    assert_eq!(report["command"].as_str(), Some("simulate"));
    assert!(report["wall_time_s"].as_float().unwrap() > 0.0);
    let assumed: Vec<&str> = report["assumed_defaults"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(assumed.contains(&"geometry.length_m"), "assumed: {assumed:?}");
    assert!(report["integration"]["steps_accepted"].as_integer().unwrap() > 0);
    // The dedicated --horizon flag is reflected in the config echo.
    assert_eq!(report["config"]["solver"]["horizon_s"].as_float(), Some(0.5));
    assert_eq!(report["config"]["geometry"]["length_m"].as_float(), Some(100.0));
}

#[test]
fn steady_writes_the_profile_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--config",
        baseline_config(),
        "--out",
        dir.path().to_str().unwrap(),
        "steady",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("steady state in"), "stdout: {}", stdout(&out));

    let table = read(dir.path(), "steady_profile.csv");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], STEADY_HEADER);
    assert_eq!(lines.len(), 1 + 20);
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), STEADY_HEADER.split(',').count());
        let rate: f64 = fields.last().unwrap().parse().unwrap();
        assert!(rate.is_finite() && rate >= 0.0, "rate column: {rate}");
    }

    let report: toml::Table = toml::from_str(&read(dir.path(), "run_report.toml")).unwrap();
    assert_eq!(report["command"].as_str(), Some("steady"));
    assert_eq!(report["steady"]["fell_back"].as_bool(), Some(false));
    assert!(report["steady"]["newton_iterations"].as_integer().unwrap() >= 1);
}

#[test]
fn zero_horizon_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--config",
        baseline_config(),
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "0",
        "simulate",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let table = read(dir.path(), "time_series.csv");
    assert_eq!(table, format!("{TIME_SERIES_HEADER}\n"));
}

#[test]
fn dedicated_flags_win_over_generic_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--config",
        baseline_config(),
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        "solver.horizon_s=30",
        "--horizon",
        "0",
        "simulate",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let table = read(dir.path(), "time_series.csv");
    assert_eq!(table.lines().count(), 1, "--horizon must beat the override");
}

#[test]
fn overrides_change_the_scenario() {
    let out = run(&[
        "--config",
        baseline_config(),
        "--override",
        "grid.cells=5",
        "validate",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("cells: 5"), "stdout: {}", stdout(&out));
}

#[test]
fn validate_reports_initial_quantities() {
    let out = run(&["--config", baseline_config(), "validate"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("configuration is feasible"), "stdout: {text}");
    assert!(text.contains("cells: 20"), "stdout: {text}");
    assert!(
        text.contains("initial pressure: 98521.84774368281 Pa"),
        "stdout: {text}"
    );
    for field in [
        "geometry.length_m",
        "geometry.diameter_m",
        "heat_transfer.exchange_coefficient_w_per_m2_k",
        "heat_transfer.particle_radius_m",
    ] {
        assert!(text.contains(field), "assumed default {field} missing: {text}");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["simulate"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("--config is required"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn nonexistent_config_names_the_path() {
    let out = run(&["--config", "/no/such/file.toml", "validate"]);
    assert_eq!(code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("cannot read"), "stderr: {text}");
    assert!(text.contains("/no/such/file.toml"), "stderr: {text}");
}

#[test]
fn invalid_field_is_named_in_the_error() {
    let out = run(&[
        "--config",
        baseline_config(),
        "--override",
        "geometry.diameter_m=-1",
        "validate",
    ]);
    assert_eq!(code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("geometry.diameter_m"), "stderr: {text}");
    assert!(text.contains("must be positive"), "stderr: {text}");
}

#[test]
fn malformed_override_is_reported() {
    let out = run(&[
        "--config",
        baseline_config(),
        "--override",
        "geometry.diameter_m",
        "validate",
    ]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("expected dotted.path=value"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let out = run(&[
        "--config",
        baseline_config(),
        "--override",
        "geometry.width_m=2",
        "validate",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("width_m"), "stderr: {}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_the_config_code() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

/// One row of `props` output, parsed.
fn props_row(args: &[&str]) -> (f64, f64, f64, f64, bool) {
    let out = run(args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t_k,cp_j_per_mol_k,h_j_per_mol,v_m3_per_mol,outside_fit_range")
    );
    let fields: Vec<&str> = lines.next().expect("one data row").split(',').collect();
    (
        fields[0].parse().unwrap(),
        fields[1].parse().unwrap(),
        fields[2].parse().unwrap(),
        fields[3].parse().unwrap(),
        fields[4].parse().unwrap(),
    )
}

#[test]
fn props_prints_reference_values() {
    // Enthalpy at the reference temperature is the formation enthalpy.
    let (t, _, h, _, outside) =
        props_row(&["props", "kaolinite", "--t-min", "298.15", "--t-max", "298.15", "--points", "1"]);
    assert_eq!(t, 298.15);
    assert!((h + 4.11959e6).abs() < 1e-6, "h(298.15) = {h}");
    assert!(!outside);

    let (_, cp, _, _, outside) =
        props_row(&["props", "kaolinite", "--t-min", "500", "--t-max", "500", "--points", "1"]);
    assert!((cp - 312.474).abs() < 0.05, "cp(500) = {cp}");
    assert!(!outside);

    // Above the fitted range the clamp is flagged.
    let (_, _, _, _, outside) =
        props_row(&["props", "kaolinite", "--t-min", "1500", "--t-max", "1500", "--points", "1"]);
    assert!(outside);

    // Ideal-gas molar volume R T / P.
    let (_, _, _, v, _) = props_row(&[
        "props",
        "water_vapor",
        "--t-min",
        "1000",
        "--t-max",
        "1000",
        "--points",
        "1",
        "--pressure",
        "100000",
    ]);
    assert!((v - 0.08314).abs() < 1e-12, "v(1000 K, 1 bar) = {v}");
}

#[test]
fn props_rejects_bad_ranges() {
    let out = run(&["props", "kaolinite", "--t-min", "-5"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("must be positive and ordered"),
        "stderr: {}",
        stderr(&out)
    );
    assert_eq!(code(&run(&["props", "kaolinite", "--points", "0"])), 2);
}

#[test]
fn props_unknown_species_lists_the_names() {
    let out = run(&["props", "unobtanium"]);
    assert_eq!(code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("available:"), "stderr: {text}");
    assert!(text.contains("kaolinite"), "stderr: {text}");
}

#[test]
fn report_config_echo_reparses_to_the_same_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = ["grid.cells=4", "solver.rtol=1e-5"];
    let out = run(&[
        "--config",
        baseline_config(),
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "0",
        "--override",
        overrides[0],
        "--override",
        overrides[1],
        "simulate",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let report: toml::Table = toml::from_str(&read(dir.path(), "run_report.toml")).unwrap();
    let echoed = toml::to_string(&report["config"]).unwrap();
    let reparsed = scenario::load_str(&echoed, None, &[]).expect("echo must re-parse");

    let override_args: Vec<String> = {
        let mut v: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        v.push("solver.horizon_s=0".into());
        v
    };
    let direct = scenario::load_file(Path::new(baseline_config()), &override_args).unwrap();
    assert_eq!(reparsed.config, direct.config);
}
