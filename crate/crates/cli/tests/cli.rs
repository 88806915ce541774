//! End-to-end tests of the command-line interface: exit codes, artifact
//! layout, config validation, and reproducibility from the echoed config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reflect-sim"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reflect-sim-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const HALFLINE_CFG: &str = r#"{
  "version": 1,
  "study": {
    "domain": {"variant": "half_space", "dimension": 1, "normal": [1.0], "offset": 0.0},
    "coefficients": {"name": "sin_1d"},
    "x0": [0.2],
    "horizon": 1.0,
    "levels": [8, 16, 32],
    "reference_level": 256,
    "paths": 100,
    "substeps": 4,
    "seed": 7
  }
}"#;

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

#[test]
fn missing_config_exits_1_with_diagnostic() {
    let out = bin()
        .args(["converge", "--config", "/nonexistent/cfg.json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_subcommand_exits_1() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tmp_dir("unknown-key");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &HALFLINE_CFG.replace("\"version\": 1,", "\"version\": 1, \"pathz\": 3,"),
    );
    let out = bin()
        .args(["converge", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pathz"));
}

#[test]
fn wrong_version_exits_1() {
    let dir = tmp_dir("version");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &HALFLINE_CFG.replace("\"version\": 1", "\"version\": 2"),
    );
    let out = bin()
        .args(["converge", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn bounds_flags_produce_expected_values() {
    let out = bin()
        .args([
            "bounds", "--beta", "1", "--delta", "1", "--r0", "1", "--q", "1", "--omega", "1",
            "--sup-osc", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 1800.25).abs() < 0.1, "value {value}");
    assert_eq!(v["overflow"], serde_json::Value::Bool(false));

    let out = bin()
        .args([
            "bounds",
            "--inner-radius",
            "2",
            "--sup-xi",
            "1",
            "--omega",
            "1",
            "--sup-osc",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 266.274).abs() < 0.01, "value {value}");

    // constant driver: zero oscillation makes the bound exactly zero
    let out = bin()
        .args([
            "bounds", "--beta", "2", "--delta", "0.5", "--q", "1", "--omega", "3", "--sup-osc",
            "0",
        ])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn bounds_requires_constants() {
    let out = bin()
        .args(["bounds", "--omega", "1", "--sup-osc", "1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn converge_writes_artifacts_and_echo_reproduces() {
    let dir = tmp_dir("converge");
    let cfg = write_config(&dir, "cfg.json", HALFLINE_CFG);
    let out1 = dir.join("run1");
    let st = bin()
        .args([
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out1.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&st), 0, "{}", String::from_utf8_lossy(&st.stderr));
    for name in ["report.json", "levels.csv", "plot.svg", "config.echo.json"] {
        assert!(out1.join(name).is_file(), "{name} missing");
    }
    let csv = fs::read_to_string(out1.join("levels.csv")).unwrap();
    assert!(csv.starts_with("N,delta,e_pt,se_pt,e_sup,se_sup\n"));

    // rerun from the echoed config: byte-identical report
    let out2 = dir.join("run2");
    let st = bin()
        .args([
            "converge",
            "--config",
            out1.join("config.echo.json").to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&st), 0);
    assert_eq!(
        fs::read(out1.join("report.json")).unwrap(),
        fs::read(out2.join("report.json")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tmp_dir("seed");
    let cfg = write_config(&dir, "cfg.json", HALFLINE_CFG);
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for (out, seed) in [(&a, None), (&b, Some("7")), (&c, Some("8"))] {
        let mut cmd = bin();
        cmd.args([
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert_eq!(exit_code(&cmd.output().unwrap()), 0);
    }
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());
    assert_ne!(ra, fs::read(c.join("report.json")).unwrap());
}

#[test]
fn workers_do_not_change_reports() {
    let dir = tmp_dir("workers");
    let cfg = write_config(&dir, "cfg.json", HALFLINE_CFG);
    let (a, b) = (dir.join("w1"), dir.join("w4"));
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        let st = bin()
            .args([
                "converge",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ])
            .output()
            .unwrap();
        assert_eq!(exit_code(&st), 0);
    }
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
}

#[test]
fn simulate_and_verify_run_clean() {
    let dir = tmp_dir("simulate");
    let cfg = write_config(&dir, "cfg.json", HALFLINE_CFG);
    let out = dir.join("sim");
    let st = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&st), 0);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.lines().nth(1).unwrap().starts_with("t,xi_1,phi_1,tv"));

    let st = bin()
        .args([
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("ver").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&st), 0, "{}", String::from_utf8_lossy(&st.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ver").join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["verification_failures"], 0);
}

#[test]
fn study_failure_exits_2() {
    let dir = tmp_dir("fail");
    // unreachable slope floor forces a study failure
    let cfg_body = HALFLINE_CFG.replace(
        "\"seed\": 7",
        "\"seed\": 7, \"floors\": {\"pt_slope\": 50.0}",
    );
    let cfg = write_config(&dir, "cfg.json", &cfg_body);
    let st = bin()
        .args([
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&st), 2);
}
