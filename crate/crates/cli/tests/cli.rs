//! Binary-level tests: exit codes, file outputs, and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spectator_cli::output::read_xy_csv;
use spectator_core::fitting::logistic_reload_model;

fn spectator(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectator"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn spectator binary")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn gain_prints_the_operating_point_value() {
    let dir = tempfile::tempdir().unwrap();
    let output = spectator(&["gain"], dir.path());
    assert!(output.status.success());
    let text = stdout(&output);
    let value: f64 = text
        .split("f_on = ")
        .nth(1)
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|tok| tok.parse().ok())
        .unwrap_or_else(|| panic!("no gain value in: {text}"));
    assert!((value - 0.880).abs() < 0.01, "gain {value}");
}

#[test]
fn amp_sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fast.cfg");
    fs::write(&config, "[experiment]\nmc_instances = 10\ngrid_resolution_deg = 1.0\n").unwrap();
    let args = |out: &str| {
        vec![
            "amp-sweep".to_string(),
            "--config".into(),
            config.display().to_string(),
            "--seed".into(),
            "42".into(),
            "--points".into(),
            "0:12:5".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in ["a", "b"] {
        let argv: Vec<String> = args(out);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let output = spectator(&argv, dir.path());
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    let first = fs::read(dir.path().join("a/amp_sweep.csv")).unwrap();
    let second = fs::read(dir.path().join("b/amp_sweep.csv")).unwrap();
    assert_eq!(first, second);
    assert!(!first.is_empty());
}

#[test]
fn fit_recovers_reloading_parameters_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    // MOT reloading parameter set.
    let truth = [0.49, 0.114, 0.020, 0.49];
    let mut csv = String::from("t,population\n");
    for i in 0..=40 {
        let t = 0.4 * i as f64 / 40.0;
        csv.push_str(&format!("{t},{}\n", logistic_reload_model(t, &truth)));
    }
    let input = dir.path().join("reload.csv");
    fs::write(&input, csv).unwrap();

    let output = spectator(
        &["fit", "logistic-reload", "reload.csv", "--out", "."],
        dir.path(),
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let result = fs::read_to_string(dir.path().join("fit_result.csv")).unwrap();
    let mut recovered = [f64::NAN; 4];
    for line in result.lines() {
        let Some((name, value)) = line.split_once(',') else { continue };
        let index = match name {
            "amplitude" => 0,
            "onset" => 1,
            "timescale" => 2,
            "exponent" => 3,
            _ => continue,
        };
        recovered[index] = value.parse().unwrap();
    }
    for (fitted, expected) in recovered.iter().zip(&truth) {
        assert!(
            (fitted - expected).abs() <= 0.05 * expected.abs(),
            "fitted {fitted} vs {expected}"
        );
    }
    assert!(stdout(&output).contains("saturation time"));
}

#[test]
fn histogram_fits_a_synthetic_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let truth = spectator_core::fitting::PoissonMixture::new(5.0, 30.0, 0.5, 0).unwrap();
    let mut csv = String::from("count,frequency\n");
    for k in 0..=80u64 {
        csv.push_str(&format!("{k},{}\n", 1e4 * truth.pmf(k)));
    }
    fs::write(dir.path().join("hist.csv"), csv).unwrap();
    let output = spectator(&["histogram", "hist.csv", "--out", "."], dir.path());
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let result = fs::read_to_string(dir.path().join("histogram_fit.csv")).unwrap();
    let value = |name: &str| -> f64 {
        result
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{name},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("lambda0") - 5.0).abs() < 0.5);
    assert!((value("lambda1") - 30.0).abs() < 3.0);
    assert!(value("eta") > 0.95);
}

#[test]
fn failures_exit_nonzero_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown fit model.
    fs::write(dir.path().join("xy.csv"), "0,1\n1,2\n2,3\n3,4\n").unwrap();
    let output = spectator(&["fit", "warp", "xy.csv", "--out", "."], dir.path());
    assert!(!output.status.success());
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
    assert!(!dir.path().join("fit_result.csv").exists());

    // Config with an invalid readout point.
    fs::write(dir.path().join("bad.cfg"), "[readout]\na = 0.9\nc = 0.46\n").unwrap();
    let output = spectator(&["gain", "--config", "bad.cfg"], dir.path());
    assert!(!output.status.success());

    // Missing input file.
    let output = spectator(&["histogram", "nope.csv", "--out", "."], dir.path());
    assert!(!output.status.success());
    assert!(!dir.path().join("histogram_fit.csv").exists());

    // Malformed sweep axis.
    let output = spectator(&["amp-sweep", "--points", "0:10", "--out", "."], dir.path());
    assert!(!output.status.success());
    assert!(!dir.path().join("amp_sweep.csv").exists());
}

#[test]
fn xy_reader_accepts_headerless_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.csv");
    fs::write(&path, "0.0,1.0\n0.5,0.9\n").unwrap();
    let (xs, ys) = read_xy_csv(&path).unwrap();
    assert_eq!(xs, vec![0.0, 0.5]);
    assert_eq!(ys, vec![1.0, 0.9]);
}
