use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const UNIT: &str = r#"params={"m1":1,"m2":1,"r1":1,"r2":1,"g":9.81}"#;

fn pidp(out: &Path, args: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pidp"));
    c.args(args)
        .arg("--set")
        .arg(format!("output.dir={}", out.display()));
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn admissible_params_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = pidp(dir.path(), &["check-params", "--set", UNIT]);
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("check_params.json"));
    assert_eq!(v["tool"], "pidp");
    assert_eq!(v["command"], "check-params");
    assert_eq!(v["result"]["verdict"], "admissible");
    assert!(String::from_utf8_lossy(&o.stdout).contains("check_params.json"));
}

#[test]
fn boundary_params_are_inadmissible() {
    let dir = tempfile::tempdir().unwrap();
    let p = r#"params={"m1":1,"m2":1,"r1":1,"r2":1.4142135623730951,"g":9.81}"#;
    let o = pidp(dir.path(), &["check-params", "--set", p]);
    assert_eq!(code(&o), 2);
    let v = read_json(&dir.path().join("check_params.json"));
    assert_eq!(v["result"]["violation"]["condition"], 3);

    let o = pidp(
        dir.path(),
        &["rank-map", "--set", p, "--set", "sweep.samples=20"],
    );
    assert_eq!(code(&o), 2);
    let o = pidp(
        dir.path(),
        &[
            "rank-map",
            "--set",
            p,
            "--set",
            "sweep.samples=20",
            "--force-inadmissible",
        ],
    );
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("rank_map.json"));
    assert_eq!(v["admissibility"]["forced"], true);
}

#[test]
fn non_positive_params_cannot_be_forced() {
    let dir = tempfile::tempdir().unwrap();
    let p = r#"params={"m1":-1,"m2":1,"r1":1,"r2":1,"g":9.81}"#;
    let o = pidp(
        dir.path(),
        &["simulate", "--set", p, "--force-inadmissible"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = r#"params={"m2":1,"r1":1,"r2":1,"g":9.81}"#;
    assert_eq!(
        code(&pidp(dir.path(), &["check-params", "--set", missing])),
        1
    );
    assert_eq!(
        code(&pidp(
            dir.path(),
            &["fields", "--set", UNIT, "--set", "state=[NaN,0,0,0]"]
        )),
        1
    );
    assert_eq!(code(&pidp(dir.path(), &["fields", "--set", UNIT])), 1);
    assert_eq!(
        code(&pidp(
            dir.path(),
            &["check-params", "--set", UNIT, "--set", "bogus=1"]
        )),
        1
    );
    assert_eq!(
        code(&pidp(
            dir.path(),
            &["cloud", "--set", UNIT, "--set", "cloud.n=0"]
        )),
        1
    );
    assert_eq!(
        code(&pidp(
            dir.path(),
            &["rank-map", "--set", UNIT, "--set", "sweep.samples=0"]
        )),
        1
    );
    assert_eq!(code(&pidp(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&pidp(dir.path(), &["--help"])), 0);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"params": {"m1": 2, "m2": 1, "r1": 1, "r2": 1, "g": 9.81}, "state": [0.1, 0.2, 0.0, 0.0]}"#)
        .unwrap();
    let o = pidp(
        dir.path(),
        &[
            "fields",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "params.m1=1.5",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("fields.json"));
    assert_eq!(v["config"]["params"]["m1"], 1.5);
    assert_eq!(v["result"]["X2"][0], 0.0);
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = pidp(
        dir.path(),
        &["simulate", "--set", UNIT, "--set", "simulate.t_end=0.5"],
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,theta1,theta2,omega1,omega2,H,u\n"));
    assert_eq!(csv.lines().count(), 502);
    let v = read_json(&dir.path().join("simulate.json"));
    assert!(v["result"]["energy_drift"]["value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn blow_up_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = pidp(
        dir.path(),
        &[
            "simulate",
            "--set",
            UNIT,
            "--set",
            r#"simulate.schedule={"breakpoints":[0],"values":[1e9]}"#,
        ],
    );
    assert_eq!(code(&o), 4);
    let v = read_json(&dir.path().join("simulate.json"));
    assert_eq!(v["result"]["partial"], true);
    assert!(v["result"]["energy_drift"]["value"].is_null());
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn rank_map_prints_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = pidp(
        dir.path(),
        &["rank-map", "--set", UNIT, "--set", "sweep.samples=200"],
    );
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout
        .lines()
        .last()
        .unwrap()
        .starts_with("SUPPORTED (sampled evidence)"));
    let csv = fs::read_to_string(dir.path().join("rank_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);

    let o = pidp(
        dir.path(),
        &[
            "rank-map",
            "--set",
            UNIT,
            "--set",
            "sweep.sampling=grid",
            "--set",
            "sweep.theta_points=8",
        ],
    );
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("rank_map.json"));
    assert_eq!(v["result"]["sweep"]["total"], 64);
}

#[test]
fn recur_and_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let o = pidp(
        dir.path(),
        &["recur", "--set", UNIT, "--set", "recur.horizon=2"],
    );
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("recurrence.json"));
    assert!(v["result"]["status"].is_string());

    let o = pidp(
        dir.path(),
        &[
            "cloud",
            "--set",
            UNIT,
            "--set",
            "cloud.n=10",
            "--set",
            "seed=3",
        ],
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("cloud.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("orbit,")).count(), 10);
    assert_eq!(
        csv.lines().filter(|l| l.starts_with("attainable,")).count(),
        10
    );
    let v = read_json(&dir.path().join("cloud.json"));
    assert_eq!(v["seed"], 3);
    assert!(v["result"]["comparison"]["hausdorff"].as_f64().unwrap() >= 0.0);
}
