use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rieszlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rieszlab")).args(args).env_remove("RIESZLAB_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sample(dir: &Path, extra: &[&str]) -> Output {
    let d = dir.to_str().unwrap();
    let mut args = vec!["-q", "sample", "--n", "16", "--s", "0.5", "--beta", "1", "--sweeps", "3000", "--burn-in", "500", "--thin", "5", "--chains", "2", "--seed", "11", "--out-dir", d];
    args.extend_from_slice(extra);
    rieszlab(&args)
}

#[test]
fn kernel_value_at_half() {
    let o = rieszlab(&["kernel", "--s", "0.5", "--x", "0.5"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v + 1.2097972868432603).abs() < 1e-12, "{v}");
}

#[test]
fn kernel_rejects_pole() {
    assert_eq!(code(&rieszlab(&["kernel", "--s", "0.5", "--x", "0"])), 2);
}

#[test]
fn kernel_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = rieszlab(&["kernel", "--s", "0.7", "--grid", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,g,g1,g2"));
    assert!(lines.count() >= 9);
}

#[test]
fn matrix_invert_matches_dense() {
    let dir = tempfile::tempdir().unwrap();
    let o = rieszlab(&["matrix", "invert", "--n", "64", "--s", "0.5", "--oracle", "dense", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sum: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(sum["max_diff"].as_f64().unwrap() <= 1e-10);
    assert_eq!(json(&dir.path().join("manifest.json"))["manifest_version"], 1);
    assert!(dir.path().join("inverse.csv").exists());
}

#[test]
fn matrix_odd_size_warns() {
    let o = rieszlab(&["matrix", "invert", "--n", "3", "--s", "0.5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("power of two"));
}

#[test]
fn matrix_decay_reports_exponent() {
    let o = rieszlab(&["-q", "matrix", "decay", "--n", "1024", "--s", "0.5"]);
    let sum: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e = sum["exponent"].as_f64().unwrap();
    assert!((e + 1.5).abs() < 0.2, "{e}");
}

#[test]
fn sample_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&sample(a.path(), &[])), 0);
    assert_eq!(code(&sample(b.path(), &[])), 0);
    assert_eq!(fs::read(a.path().join("samples.csv")).unwrap(), fs::read(b.path().join("samples.csv")).unwrap());
    let m = json(&a.path().join("manifest.json"));
    assert_eq!(m["manifest_version"], 1);
    assert_eq!(m["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn sample_bad_config_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&sample(d.path(), &["--sweeps", "10", "--burn-in", "20"])), 2);
}

#[test]
fn resume_is_bitwise_identical() {
    let whole = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    assert_eq!(code(&sample(whole.path(), &[])), 0);
    assert_eq!(code(&sample(split.path(), &["--stop-after", "1200"])), 0);
    assert!(split.path().join("checkpoint.json").exists());
    let d = split.path().to_str().unwrap();
    assert_eq!(code(&rieszlab(&["-q", "sample", "--out-dir", d, "--resume"])), 0);
    assert_eq!(fs::read(whole.path().join("samples.csv")).unwrap(), fs::read(split.path().join("samples.csv")).unwrap());
    assert!(!split.path().join("checkpoint.json").exists());
}

#[test]
fn resume_with_other_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sample(dir.path(), &["--stop-after", "1000"])), 0);
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&rieszlab(&["-q", "sample", "--out-dir", d, "--resume", "--seed", "12"])), 4);
}

#[test]
fn analyze_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sample(dir.path(), &[])), 0);
    let csv = dir.path().join("samples.csv");
    let o = rieszlab(&["-q", "analyze", "--samples", csv.to_str().unwrap(), "--estimator", "covariance,variance-scaling", "--ks", "1,2,4"]);
    assert!(matches!(code(&o), 0 | 5), "{}", String::from_utf8_lossy(&o.stderr));
    let cov = fs::read_to_string(dir.path().join("covariance.csv")).unwrap();
    assert_eq!(cov.lines().count(), 16 / 2 + 2);
    let sum = json(&dir.path().join("analysis_summary.json"));
    assert!(sum["variance_scaling"]["sigma2"].as_f64().unwrap() > 0.0);
    assert_eq!(json(&dir.path().join("analysis_manifest.json"))["manifest_version"], 1);
}

#[test]
fn analyze_empty_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("samples.csv");
    fs::write(&p, "").unwrap();
    assert_eq!(code(&rieszlab(&["analyze", "--samples", p.to_str().unwrap()])), 4);
    assert_eq!(code(&rieszlab(&["analyze", "--samples", dir.path().join("missing.csv").to_str().unwrap()])), 4);
}

#[test]
fn verify_unknown_suite() {
    assert_eq!(code(&rieszlab(&["verify", "bogus"])), 2);
}

#[test]
fn verify_kernel_suite_reports() {
    let o = rieszlab(&["verify", "kernel"]);
    let out = stdout(&o);
    assert!(out.contains("criterion  3"), "{out}");
    assert!(matches!(code(&o), 0 | 5));
}

#[test]
fn thread_count_flag_and_env() {
    assert_eq!(code(&rieszlab(&["--threads", "0", "kernel", "--s", "0.5", "--x", "0.5"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_rieszlab"))
        .args(["kernel", "--s", "0.5", "--x", "0.5"])
        .env("RIESZLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = rieszlab(&["--threads", "2", "-q", "matrix", "invert", "--n", "16", "--s", "0.5", "--out-dir", d]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("manifest.json"))["threads"], 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[params]\nn = 16\ns = 0.5\nbeta = 3.0\n\n[sampler]\nsweeps = 1500\nburn_in = 300\nseed = 99\n").unwrap();
    let out = dir.path().join("run");
    let o = rieszlab(&["-q", "--config", cfg.to_str().unwrap(), "sample", "--seed", "5", "--chains", "1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["params"]["beta"], 3.0);
    assert_eq!(m["sampler"]["sweeps"], 1500);
    assert_eq!(m["sampler"]["seed"], 5);

    fs::write(&cfg, "[sampler]\nsweepz = 10\n").unwrap();
    let o = rieszlab(&["--config", cfg.to_str().unwrap(), "sample", "--n", "16", "--s", "0.5", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
