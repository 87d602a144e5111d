use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nosmc::scenario::find;

fn nosmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nosmc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn list_names_every_scenario() {
    let o = nosmc(&["list"]);
    assert!(o.status.success());
    for name in ["example41", "example42", "example61", "example62", "uav-mission", "pid-windup"] {
        assert!(stdout(&o).contains(name), "missing {name}");
    }
}

#[test]
fn example41_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nosmc(&["simulate", "example41", "--seed", "7", "--out-dir", out, "--assert-no-overshoot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let trace = lines(&dir.path().join("trace.csv"));
    assert_eq!(trace[0], "t,e1,e2,sigma,u,d,mode");
    // 40 s at dt = 1e-4 plus the initial row.
    assert_eq!(trace.len(), 1 + 400_001);
    assert_eq!(trace[1], "0,100,-10,-5,-6,3,reaching");
    assert!(trace.last().unwrap().starts_with("40,"));

    let events = lines(&dir.path().join("events.csv"));
    assert_eq!(events[0], "kind,t");
    let kinds: Vec<&str> = events[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(kinds, ["tc", "gainUpdate", "surfaceHit"]);

    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["scenario"], "example41");
    assert_eq!(m["seed"], 7);
    assert!(m["metrics"]["overshoot"].is_null());
    let k1 = m["gain_updates"][0]["gains"]["k1"].as_f64().unwrap();
    assert!((k1 - 1.25).abs() < 0.05);
}

#[test]
fn pid_comparison_fails_the_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let o = nosmc(&[
        "simulate",
        "example41",
        "--controller",
        "pid",
        "--dt",
        "1e-3",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--assert-no-overshoot",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("overshoot"));
}

#[test]
fn uav_writes_per_axis_files() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        nosmc(&["simulate", "--scenario", "uav-mission", "--t-end", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for axis in ["x", "y", "z", "psi", "theta", "phi"] {
        let rows = lines(&dir.path().join(format!("{axis}.csv")));
        assert_eq!(rows[0], "t,e1,e2,sigma,u,d,mode,ref,pos,vel");
        assert_eq!(rows.len(), 1 + 1001);
        assert!(dir.path().join(format!("{axis}_events.csv")).exists());
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, find("example42").unwrap().to_toml()).unwrap();
    let out = dir.path().join("out");
    let o = nosmc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--t-end",
        "2",
        "--dt",
        "0.01",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("trace.csv")).len(), 1 + 201);
}

#[test]
fn gains_prints_the_pipeline() {
    let o = nosmc(&["gains", "example41"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("zone            II-2"));
    assert!(s.contains("k1              1.2500"));
    assert!(s.contains("k2              16.8750"));
    let e62 = stdout(&nosmc(&["gains", "example62"]));
    let rho_c: f64 = e62.split("rho_c = ").nth(1).unwrap().lines().next().unwrap().parse().unwrap();
    assert!((rho_c - 15.44).abs() < 1e-2);
    let origin = stdout(&nosmc(&["gains", "example41", "--e1", "0", "--e2", "0"]));
    assert!(origin.contains("zone            origin"));
    assert!(origin.contains("k2              7.5000"));
}

#[test]
fn infeasible_gains_exit_one() {
    // e2 far beyond what k2M = 20 can stop inside the band.
    let o = nosmc(&["gains", "example41", "--e1", "1", "--e2", "-40"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn errors_exit_one() {
    assert_eq!(nosmc(&["simulate", "no-such-scenario"]).status.code(), Some(1));
    assert_eq!(nosmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nosmc(&["sweep", "example62", "--param", "rho0=2,3", "--max-cells", "1"]).status.code(), Some(1));
    assert_eq!(nosmc(&["sweep", "example62", "--param", "bogus=1"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = nosmc(&[
        "sweep",
        "example62",
        "--param",
        "rho0=5,10",
        "--param",
        "seed=1,2,3",
        "--t-end",
        "5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&dir.path().join("sweep.csv"));
    assert!(rows[0].starts_with("rho0,seed,overshoot,"));
    assert_eq!(rows.len(), 1 + 6);
}

#[test]
fn monte_carlo_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = nosmc(&[
        "sweep",
        "--monte-carlo",
        "--runs",
        "4",
        "--controller",
        "smooth",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--assert-no-overshoot",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("smooth: 4/4"));
    assert_eq!(lines(&dir.path().join("monte_carlo.csv")).len(), 1 + 4);
}
