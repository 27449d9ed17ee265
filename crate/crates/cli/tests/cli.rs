use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdde-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SDDE_LAB_THREADS").output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn passing_theorem_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run", "--scenario", "affine_theorem", "--n-paths", "400", "--dt", "tau/32", "--seed", "1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["schema"], "sdde-report/1");
    let conds = s["conditions"].as_object().unwrap();
    assert!(conds.values().all(|v| v == "PASS_SAMPLED" || v == "NOT_APPLICABLE"));
    assert_eq!(conds["DelayMonotoneDrift"], "PASS_SAMPLED");
    assert!(s["violation_prob"].as_f64().unwrap() <= 0.01);
    let csv = fs::read_to_string(dir.path().join("curve_positive_part.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,mean,stderr");
    assert_eq!(csv.lines().count(), 1 + 65);
}

#[test]
fn counterexample_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--scenario", "ex2_5", "--n-paths", "2000", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(dir.path());
    assert_eq!(s["conditions"]["DelayMonotoneJump"], "FAIL");
    assert_eq!(s["exit_code"], 2);
    let est = s["oracle"]["estimate"].as_f64().unwrap();
    assert!((est - 0.632).abs() < 0.04);
    let cond: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("conditions.json")).unwrap()).unwrap();
    let w = &cond["conditions"]["DelayMonotoneJump"]["witness"];
    assert!(w["lhs"].as_f64().unwrap() < w["rhs"].as_f64().unwrap());
}

#[test]
fn structural_rejection_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--scenario", "ex2_4", "--n-paths", "200", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(summary(dir.path())["structural_rejection"].is_string());
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let bad_dt = run(&["run", "--scenario", "affine_theorem", "--dt", "0.3", "--seed", "1", "--out", d]);
    assert_eq!(bad_dt.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_dt.stderr).contains("does not divide"));
    let no_seed = run(&["run", "--scenario", "affine_theorem", "--out", d]);
    assert_eq!(no_seed.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));
    let tower_outside = run(&["run", "--scenario", "ex2_4", "--seed", "1", "--n-paths", "5", "--emit", "tower", "--out", d]);
    assert_eq!(tower_outside.status.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"scenario\": \"ex2_5\",\n  \"seed\": 1,\n  \"n_pathz\": 4\n}\n").unwrap();
    let malformed = run(&["run", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!(malformed.status.code(), Some(1));
    let err = String::from_utf8_lossy(&malformed.stderr).to_string();
    assert!(err.contains("n_pathz") && err.contains("line 4"), "{err}");
}

#[test]
fn unknown_scenario_lists_valid_ids() {
    let out = run(&["run", "--scenario", "ex9_9", "--seed", "1"]);
    assert_ne!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lemma_pure_jump") && err.contains("ex2_3"), "{err}");
}

#[test]
fn echoed_config_reruns_byte_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = run(&[
        "run", "--scenario", "ex3_2", "--n-paths", "300", "--dt", "tau/16", "--seed", "11", "--emit",
        "ordering,curve,tower,conditions,paths", "--path-exports", "2", "--out", a.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = summary(a.path())["config"].clone();
    let cfg = b.path().join("echo.json");
    fs::write(&cfg, serde_json::to_string_pretty(&echo).unwrap()).unwrap();
    let rerun_dir = b.path().join("out");
    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", rerun_dir.to_str().unwrap()])
        .env("SDDE_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(artifacts(a.path()), artifacts(&rerun_dir));
    let names: Vec<_> = artifacts(a.path()).into_iter().map(|(n, _)| n).collect();
    assert!(names.contains(&"paths_1_lower.csv".to_string()));
    assert!(names.contains(&"tower.json".to_string()));
}

#[test]
fn thread_count_does_not_change_reports() {
    let base: Vec<_> = [1, 4, 8]
        .iter()
        .map(|t| {
            let dir = tempfile::tempdir().unwrap();
            let out = run(&[
                "run", "--scenario", "lemma_pure_jump", "--n-paths", "1500", "--dt", "tau/16", "--seed", "5",
                "--threads", &t.to_string(), "--out", dir.path().to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0));
            artifacts(dir.path())
        })
        .collect();
    assert_eq!(base[0], base[1]);
    assert_eq!(base[0], base[2]);
}

#[test]
fn path_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run", "--scenario", "ex2_5", "--n-paths", "3", "--dt", "tau/4", "--seed", "2", "--emit", "paths", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("paths_0_lower.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,value_pre,value_post,jump_flag");
    let first: Vec<_> = lines.next().unwrap().split(',').collect();
    assert_eq!(first, ["0.0000000000000000e0", "-1.0000000000000000e0", "-1.0000000000000000e0", "0"]);
    assert!(!dir.path().join("paths_3_lower.csv").exists());
}

#[test]
fn list_shows_every_scenario() {
    let out = run(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for id in ["ex2_3", "ex2_4", "ex2_5", "ex3_2", "affine_theorem", "lemma_pure_jump"] {
        assert!(text.contains(id));
    }
}
