use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayaircomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = bin(&["validate", "--config", &config]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: suite train seed 0"));
}

#[test]
fn validate_lists_every_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "momentum = 1.5\ndevices_per_resource = 3\n");
    let out = bin(&["validate", "--config", &config]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid configuration"));
    assert!(err.contains("momentum"));
    assert!(err.contains("divisible"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "learning_rate = 0.1\n");
    let out = bin(&["validate", "--config", &config]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    let out = bin(&["validate", "--config", &config, "--set", "rounds=3"]);
    assert!(!out.status.success());
}

#[test]
fn seeds_are_reproducible() {
    let a = bin(&["seeds", "--master", "42", "--count", "4"]);
    let b = bin(&["seeds", "--master", "42", "--count", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let seeds: Vec<u64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(seeds.len(), 4);
    assert_ne!(seeds[0], seeds[1]);
}

#[test]
fn run_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "suite = \"train\"\nseed = 1\n");
    let out_dir = dir.path().join("curves");
    let out = bin(&[
        "run",
        "--config",
        &config,
        "--suite",
        "curves",
        "--seed",
        "9",
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--set",
        "curve_noise_variances=[0.5]",
        "--set",
        "curve_points=101",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("curve_uniform_nv0.5.csv")).unwrap();
    assert!(text.contains("# seed: 9\n"));
    assert!(text.contains("# suite: curves\n"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 102);
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 2);
}

#[test]
fn run_rejects_bad_suite() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = bin(&["run", "--config", &config, "--suite", "plots"]);
    assert!(!out.status.success());
}

#[test]
fn divergence_aborts_with_round() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "dataset = \"synthetic-regression\"\nmodel = \"linear_regression\"\npartition = \"iid\"\n\
         aggregator = \"naive_mean\"\nconvention = \"sum\"\nbase_lr = 1e30\nmomentum = 0.0\nrounds = 50\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("round"), "{err}");
    assert!(err.contains("non-finite"), "{err}");
}
