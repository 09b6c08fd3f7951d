use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kbrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbrg")).args(args).output().expect("kbrg runs")
}

fn ok(args: &[&str]) -> Output {
    let o = kbrg(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect()
}

#[test]
fn sample_is_deterministic_and_listed_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = vec![];
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(run);
        let o = out.to_str().unwrap();
        ok(&["sample", "--out", o, "--seed", "42", "--trials", "2", "--threads", threads, "--n", "120", "--tau", "3"]);
        let m = kbrg::harness::RunManifest::load(&out).unwrap();
        assert!(m.verify(&out).unwrap().is_empty());
        assert_eq!(m.seeds.len(), 2);
        files.push(m.outputs.iter().map(|o| fs::read(out.join(&o.path)).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn complete_graph_eigenvalue_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    ok(&["sample", "--out", o, "--n", "64", "--alpha", "0", "--kernel", "trivial"]);
    let rows = csv_rows(&dir.path().join("eigenvalues_0000.csv"));
    let top = 63f64.sqrt();
    assert_eq!(rows.len(), 64);
    assert!((rows[63][1] - top).abs() < 1e-10);
    assert!((rows[0][1] + 1.0 / top).abs() < 1e-10);
}

#[test]
fn zero_trials_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbrg(&["sample", "--out", dir.path().to_str().unwrap(), "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));
}

#[test]
fn moments_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    ok(&["moments", "--out", out.to_str().unwrap(), "--k", "1", "--empirical", "true", "--trials", "2", "--n", "400"]);
    let rows = csv_rows(&out.join("moments_compare.csv"));
    assert!((rows[0][1] - 2.25).abs() < 1e-6);
    assert!(rows[0][3] > 0.0);

    let out = dir.path().join("unit");
    ok(&["moments", "--out", out.to_str().unwrap(), "--law", "unit", "--k", "3"]);
    let text = fs::read_to_string(out.join("moments_theory.csv")).unwrap();
    assert!(text.lines().nth(3).unwrap().starts_with("3,5.0000000000000000e0,"));

    let o = kbrg(&["moments", "--out", dir.path().join("x").to_str().unwrap(), "--k", "5", "--empirical", "true"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation"));
}

#[test]
fn stieltjes_and_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&["stieltjes", "--out", out.to_str().unwrap(), "--kernel", "trivial", "--z", "0+1i"]);
    let rows = csv_rows(&out.join("stieltjes.csv"));
    assert!((rows[0][3] - 0.6180339887).abs() < 1e-6);

    let out = dir.path().join("d");
    ok(&["density", "--out", out.to_str().unwrap(), "--trunc_m", "20", "--x-min", "-2", "--x-max", "2", "--x-step", "0.25"]);
    let rows = csv_rows(&out.join("density.csv"));
    assert_eq!(rows.len(), 17);
    for i in 0..rows.len() {
        assert!((rows[i][1] - rows[rows.len() - 1 - i][1]).abs() < 1e-3);
    }

    let o = kbrg(&["stieltjes", "--out", dir.path().join("r").to_str().unwrap(), "--tau", "4", "--sigma", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma < tau - 2"));
}

#[test]
fn tail_requires_sigma_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbrg(&["tail", "--out", dir.path().to_str().unwrap(), "--sigma", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma = 1"));
}

#[test]
fn tail_and_compare_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    ok(&["tail", "--out", out.to_str().unwrap(), "--n", "800", "--trials", "3", "--tau", "3"]);
    let fit = fs::read_to_string(out.join("tail_fit.csv")).unwrap();
    assert!(fit.starts_with("slope,slope_stderr,intercept"));
    assert!(out.join("survival.csv").exists());

    let out = dir.path().join("c");
    ok(&["compare", "--out", out.to_str().unwrap(), "--n", "300", "--trials", "2"]);
    let rows = csv_rows(&out.join("compare.csv"));
    assert!(rows[0].iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn validate_reports_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = ok(&["validate", "--out", out.to_str().unwrap(), "--criteria", "1"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 1 PASS"));
    assert!(out.join("validation.json").exists());

    let o = kbrg(&["validate", "--out", dir.path().join("bad").to_str().unwrap(), "--criteria", "2", "--debug-c-scale", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 2 FAIL"));
}

#[test]
fn config_file_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 64\nalpha = 0\nkernel = trivial\ntrials = 1\n").unwrap();
    let out = dir.path().join("o");
    ok(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let m = kbrg::harness::RunManifest::load(&out).unwrap();
    assert_eq!(m.config["n"], "64");
    let o = kbrg(&["sample", "--out", out.to_str().unwrap(), "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
