use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaos-sep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn rho_period_three() {
    let o = run(&["rho", "--period", "3"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 1.618_033_988_749_895).abs() < 1e-12);
}

#[test]
fn rho_even_period_is_usage_error() {
    let o = run(&["rho", "--period", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("period must be odd"), "{}", stderr(&o));
}

#[test]
fn rho_legacy_and_json() {
    let o = run(&["rho", "--period", "5", "--legacy"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v > 1.0 && (v.powi(4) - v.powi(3) - 1.0).abs() < 1e-9);

    let o = run(&["rho", "--period", "5", "--json"]);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(j.to_string().contains("1.51"));
}

#[test]
fn rho_table_rows() {
    let o = run(&["rho", "--table", "15"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,rho_new,rho_legacy,gap"));
    assert_eq!(lines.count(), 7);
}

fn odd_periods(summary: &str) -> Vec<usize> {
    summary
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let p: usize = f[0].parse().ok()?;
            (f[1] == "true" && p % 2 == 1 && p > 1).then_some(p)
        })
        .collect()
}

#[test]
fn periods_tent_and_slope() {
    let o = run(&["periods", "--function", "tent", "--max", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(odd_periods(&stdout(&o)), vec![3]);

    let o = run(&["periods", "--function", "slope:1.2", "--max", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(odd_periods(&stdout(&o)).is_empty());
}

#[test]
fn periods_family_orbit_through_zero() {
    let dir = tempfile::tempdir().unwrap();
    let orbits = dir.path().join("orbits.csv");
    let o = run(&[
        "periods",
        "--function",
        "family:5",
        "--max",
        "5",
        "--orbits",
        orbits.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&orbits).unwrap();
    let through_zero = text.lines().skip(1).any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[0] == "5" && f[3].parse::<f64>().map(|v| v.abs() < 1e-9).unwrap_or(false)
    });
    assert!(through_zero, "{text}");
}

#[test]
fn periods_missing_file_is_usage_error() {
    let o = run(&["periods", "--function", "file:/nonexistent/f.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bound_reports_condition() {
    let o = run(&["bound", "--p", "3", "--t", "14", "--width", "4", "--depth", "2", "--exact-crossings"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["condition_met"], true);
    assert_eq!(j["crossings_measured"], true);
    assert_eq!(j["crossings_used"], 754);
    let floor = j["floor_refined"].as_f64().unwrap();
    assert!((floor - 0.017_727_688_279_331_164).abs() < 1e-12);

    let o = run(&["bound", "--t", "10", "--width", "20", "--depth", "5"]);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["condition_met"], false);
}

#[test]
fn train_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "train",
        "--task",
        "easy",
        "--depths",
        "1,2",
        "--width",
        "3",
        "--epochs",
        "20",
        "--seeds",
        "1",
        "--samples",
        "256",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "plot.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let rows = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "train");
}

#[test]
fn train_rejects_bad_depths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--task", "easy", "--depths", "3..1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn no_partial(parent: &Path) -> bool {
    std::fs::read_dir(parent)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().contains(".partial-"))
}

#[test]
fn report_corrupt_function_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"xs\": [0, 1], \"ys\": [").unwrap();
    let out = dir.path().join("bundle");
    let spec = format!("file:{}", bad.display());
    let o = run(&["report", "--quick", "--function", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(no_partial(dir.path()));
}

#[test]
fn report_refuses_nonempty_target() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x"), "").unwrap();
    let o = run(&["report", "--quick", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_quick_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bundle");
    let o = run(&["report", "--quick", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    for f in [
        "rates.csv",
        "spectra.csv",
        "covering.csv",
        "integral.csv",
        "periods.csv",
        "easy_results.csv",
        "easy_plot.csv",
        "checks.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(!out.join("hard_results.csv").exists());
    let checks = std::fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(!checks.contains("false"), "{checks}");
    assert!(no_partial(dir.path()));
}
