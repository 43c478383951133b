use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbound(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbound"))
        .args(args)
        .current_dir(dir)
        .env_remove("FBOUND_THREADS")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn solve_linear_writes_boundary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(
        &["solve-linear", "--E", "10", "--r", "0.1", "--q", "0.05", "--sigma", "0.2", "--T", "1", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "b.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,rho"));
    assert_eq!(lines.next(), Some("0,20"));
    let last: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 22.3754).abs() < 0.01);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "b.csv.manifest.json")).unwrap();
    assert_eq!(manifest["command"], "solve-linear");
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
    assert!(manifest["diagnostics"]["iterations"].as_u64().unwrap() <= 10);
}

#[test]
fn violated_rate_ordering_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(&["solve-pde", "--model", "rapm", "--C", "0.01", "--R", "5", "--r", "0.05", "--q", "0.06"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0 < q < r"), "{err}");
}

#[test]
fn missing_model_parameter_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(&["solve-pde", "--model", "barles-soner"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--a"));
    let out = fbound(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // one micro-iteration cannot settle the boundary
    let out = fbound(&["solve-pde", "--n", "40", "--m", "400", "--micro-max", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn eoc_table_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(&["eoc", "--ref", "integral", "--meshes", "0.03,0.012", "--out", "e.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "e.csv");
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["h", "err_linf", "eoc_linf", "err_l2", "eoc_l2"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], "");
    let eoc: f64 = rows[2][2].parse().unwrap();
    assert!(eoc > 0.8 && eoc < 1.1, "{eoc}");
}

#[test]
fn config_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "sigma = 0.3\nspots = [15, 20]\nnodes = 60\n").unwrap();
    let from_config = fbound(&["price", "--config", "c.toml", "--out", "a.csv"], dir.path());
    assert_eq!(from_config.status.code(), Some(0));
    let overridden = fbound(&["price", "--config", "c.toml", "--sigma", "0.2", "--out", "b.csv"], dir.path());
    assert_eq!(overridden.status.code(), Some(0));
    let plain = fbound(&["price", "--sigma", "0.2", "--spots", "15,20", "--nodes", "60", "--out", "c.csv"], dir.path());
    assert_eq!(plain.status.code(), Some(0));
    let a = read(dir.path(), "a.csv");
    assert_eq!(a.lines().count(), 3);
    assert_ne!(a, read(dir.path(), "b.csv"));
    assert_eq!(read(dir.path(), "b.csv"), read(dir.path(), "c.csv"));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["sweep", "--model", "rapm", "--values", "1,10", "--n", "40", "--m", "800", "--out", out, "--threads", "2"]
    };
    assert_eq!(fbound(&args("x.csv"), dir.path()).status.code(), Some(0));
    assert_eq!(fbound(&args("y.csv"), dir.path()).status.code(), Some(0));
    assert_eq!(read(dir.path(), "x.csv"), read(dir.path(), "y.csv"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fbound"))
        .args(["put-asymptotic", "--steps", "0"])
        .env("FBOUND_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prices_beyond_the_boundary_are_intrinsic() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(&["price", "--spots", "20,25"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "25,15,exercise"), "{text}");
}

#[test]
fn asian_outputs_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbound(&["solve-asian", "--m", "2000", "--out", "a.csv", "--inv-out", "i.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(dir.path(), "a.csv").starts_with("tau,rho\n0,1.3333333333333333\n"));
    let inv = read(dir.path(), "i.csv");
    assert!(inv.starts_with("t,inv_xf\n"));
    assert!(inv.trim_end().ends_with(",0.75"));
}

#[test]
fn calibration_reports_per_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("q.csv"), "timestamp,S,E,T,V_bid,V_ask\nt0,25,25,1,2.5,3.4\n").unwrap();
    let out = fbound(&["rapm-calibrate", "--input", "q.csv", "--sigma", "0.25", "--out", "c.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "c.csv");
    assert!(csv.starts_with("timestamp,sigma_rapm,R,resid\nt0,"));
}
