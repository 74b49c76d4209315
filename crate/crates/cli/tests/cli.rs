use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatial-econ"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "name = \"small\"\n[grid]\nnx = 32\nny = 32\n[run]\nt_end = 1.0\nsnapshot_times = [0.0, 1.0]\nmetrics_interval = 0.5\n";

#[test]
fn run_succeeds_and_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = bin(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "17",
        "--grid",
        "40",
        "36",
        "--safety",
        "0.3",
        "--snapshots",
        "0,0.5,1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("seed=17"));
    assert!(meta.contains("grid=40x36"));
    assert!(meta.contains("safety=0.3"));
    assert!(out.join("snapshots/l_t0.5.bin").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("mass drift"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[params]\nbogus = 1\n");
    let o = bin(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params"));

    let cfg = write_config(dir.path(), SMALL);
    let o = bin(&[
        "run",
        &cfg,
        "--safety",
        "1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&[
        "run",
        &cfg,
        "--snapshots",
        "0,9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["scenario", "atlantis"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["run", "/nonexistent/config.toml"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}[params]\nc_m = 0.01\n[init]\nkind = \"uniform\"\namplitude = 0.5\n[numerics]\nfixed_dt = 1.0\n");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("last_good.bin").exists());
}

#[test]
fn builtin_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "scenario",
        "wage-profile",
        "--grid",
        "64",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("snapshots/w_t0.bin").exists());
}

#[test]
fn stability_scan_reports_the_critical_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnx = 64\nny = 64\n");
    let o = bin(&[
        "stability-scan",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("critical c_M"));
    let report = fs::read_to_string(dir.path().join("stability.txt")).unwrap();
    assert!(report.contains("critical_c_m_lower="));
}

#[test]
fn converge_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[grid]\nnx = 32\nny = 32\n[convergence]\nn_list = [200, 800]\nseeds = [1, 2]\nt_end = 0.2\n";
    let cfg = write_config(dir.path(), body);
    let o = bin(&["converge", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(dir.path().join("convergence_summary.csv").exists());
}
