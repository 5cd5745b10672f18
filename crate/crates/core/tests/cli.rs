use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gasloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gasloc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(dir: &Path, args: &[&str]) -> String {
    let out = gasloc(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn default_sweep_has_sixteen_rows() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["sweep", "--measurements", "3", "--out", "o"]);
    let text = fs::read_to_string(tmp.path().join("o/sweep_energy.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[0].starts_with("threshold,failures,"));
    assert!(lines[1].starts_with("0,"));
    assert!(lines[16].starts_with("0.015,"));
}

#[test]
fn simulate_detect_estimate_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["simulate", "--measurements", "2", "--out", "o"]);
    assert!(d.join("o/traces/m001.csv").is_file());
    assert!(d.join("o/traces/m002.csv").is_file());
    assert_eq!(
        fs::read_to_string(d.join("o/truth.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    ok(d, &["detect", "--out", "o", "--scheme", "amplitude"]);
    let det = fs::read_to_string(d.join("o/detections/m001.csv")).unwrap();
    assert_eq!(det.lines().count(), 25);
    assert!(det.starts_with("node,detected,t_s,gamma_v,rho_o_v"));

    ok(d, &["estimate", "--out", "o"]);
    let wind = fs::read_to_string(d.join("o/wind.csv")).unwrap();
    assert_eq!(wind.lines().count(), 3);
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "simulate",
                "--measurements",
                "2",
                "--seed",
                "11",
                "--out",
                out,
            ],
        );
    }
    let a = fs::read(d.join("a/traces/m002.csv")).unwrap();
    let b = fs::read(d.join("b/traces/m002.csv")).unwrap();
    assert_eq!(a, b);

    ok(
        d,
        &[
            "simulate",
            "--measurements",
            "2",
            "--seed",
            "12",
            "--out",
            "c",
        ],
    );
    assert_ne!(a, fs::read(d.join("c/traces/m002.csv")).unwrap());
}

#[test]
fn transmitter_column_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("bad.csv"),
        "time_s,N11,N33\n0.1,0.1,0.1\n0.2,0.1,0.1\n",
    )
    .unwrap();
    let err = stderr_of(d, &["detect", "--input", "bad.csv", "--out", "o"]);
    assert!(err.contains("N33"), "{err}");
    assert!(err.contains("geometry mismatch"), "{err}");
}

#[test]
fn malformed_config_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.toml"), "seed = 3\n\n[noise]\nnu = \"many\"\n").unwrap();
    let err = stderr_of(d, &["simulate", "--config", "bad.toml"]);
    assert!(err.contains("bad.toml:4:"), "{err}");

    fs::write(
        d.join("unknown.toml"),
        "[detection]\nwindow = 3\ncolour = 1\n",
    )
    .unwrap();
    let err = stderr_of(d, &["simulate", "--config", "unknown.toml"]);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn missing_config_error_is_not_repeated() {
    let tmp = tempfile::tempdir().unwrap();
    let err = stderr_of(tmp.path(), &["simulate", "--config", "absent.toml"]);
    assert_eq!(err.matches("os error").count(), 1, "{err}");
}

#[test]
fn evaluate_on_truth_gives_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut text = String::from("measurement,cluster,pair,x_hat_m,y_hat_m,root2_x_m,root2_y_m\n");
    for m in 1..=3 {
        for (c, p) in [(1, 1), (1, 2), (2, 1)] {
            text.push_str(&format!("{m},{c},{p},0.3,0.3,0.1,0.1\n"));
        }
    }
    fs::write(d.join("est.csv"), text).unwrap();
    ok(d, &["evaluate", "--input", "est.csv", "--out", "o"]);
    let out = fs::read_to_string(d.join("o/cluster_error.csv")).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows, ["1,0,2", "2,0,1"]);
}

#[test]
fn design_filter_writes_symmetric_taps() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(tmp.path(), &["design-filter", "--out", "o"]);
    assert!(stdout.contains("order 242"), "{stdout}");
    let taps: Vec<f64> = fs::read_to_string(tmp.path().join("o/filter_taps.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(taps.len(), 243);
    assert!(taps.iter().zip(taps.iter().rev()).all(|(a, b)| a == b));
}

#[test]
fn extract_and_fit_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["simulate", "--measurements", "1", "--out", "o"]);
    ok(d, &["extract-noise", "--out", "o"]);
    assert!(d.join("o/noise/m001_filtered.csv").is_file());
    ok(
        d,
        &[
            "fit",
            "--input",
            "o/noise/m001_noise.csv",
            "--families",
            "student_t",
            "--out",
            "o",
        ],
    );
    let fit = fs::read_to_string(d.join("o/fit.csv")).unwrap();
    let row: Vec<&str> = fit.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "student_t");
    let nu: f64 = row[1].parse().unwrap();
    assert!(nu > 1.0 && nu < 2.5, "nu = {nu}");
}
