//! CLI contract tests: exit codes, usage errors, and clean failure behavior.

use std::path::Path;
use std::process::{Command, Output};

fn foehn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foehn"))
        .args(args)
        .output()
        .expect("failed to spawn the pipeline binary")
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let out = foehn(&["classify", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "no usage text in: {stderr}");
}

#[test]
fn unknown_subcommand_exits_1() {
    let out = foehn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_learner_value_exits_1() {
    let out = foehn(&["train", "--config", "c.json", "--out", "d", "--learner", "ridge"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_2_with_log_line() {
    let out = foehn(&["classify", "--config", "/nonexistent/c.json", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("level=error"), "no structured error line in: {stderr}");
}

#[test]
fn unknown_station_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap().to_string();
    let out = foehn(&["synth", "--out", &out_dir, "--seed", "1", "--years", "1"]);
    assert!(out.status.success());
    let cfg = dir.path().join("config.json").to_str().unwrap().to_string();
    let out = foehn(&[
        "classify", "--config", &cfg, "--out", &out_dir, "--station", "nowhere",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nowhere"), "error does not name the station: {stderr}");
}

#[test]
fn failed_stage_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap().to_string();
    let out = foehn(&["synth", "--out", &out_dir, "--seed", "1", "--years", "1"]);
    assert!(out.status.success());
    let cfg = dir.path().join("config.json").to_str().unwrap().to_string();
    // decompose with no reconstruction present must fail without side effects
    let out = foehn(&[
        "decompose", "--config", &cfg, "--out", &out_dir, "--learner", "lasso", "--set", "full",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("decompose").exists(), "partial decompose output left behind");
    assert!(no_temp_files(dir.path()), "temporary files left behind");
}

fn no_temp_files(root: &Path) -> bool {
    std::fs::read_dir(root).unwrap().all(|e| {
        let path = e.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".tmp") {
            return false;
        }
        !path.is_dir() || no_temp_files(&path)
    })
}

#[test]
fn report_on_empty_workspace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap().to_string();
    let out = foehn(&["synth", "--out", &out_dir, "--seed", "1", "--years", "1"]);
    assert!(out.status.success());
    let cfg = dir.path().join("config.json").to_str().unwrap().to_string();
    let out = foehn(&["report", "--config", &cfg, "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2), "report with no artifacts must fail");
}

#[test]
fn log_level_env_var_controls_verbosity() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap().to_string();
    let run = |level: &str| {
        let output = Command::new(env!("CARGO_BIN_EXE_foehn"))
            .args(["synth", "--out", &out_dir, "--seed", "1", "--years", "1"])
            .env("FOEHN_LOG", level)
            .output()
            .unwrap();
        assert!(output.status.success());
        String::from_utf8_lossy(&output.stderr).into_owned()
    };
    assert!(run("info").contains("level=info"));
    assert!(!run("error").contains("level=info"), "info lines leak at level=error");
}
