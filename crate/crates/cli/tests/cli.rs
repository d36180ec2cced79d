//! End-to-end checks of the `augope` binary.

use std::path::Path;
use std::process::{Command, Output};

fn augope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augope")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[test]
fn list_envs_prints_three_names() {
    let o = augope(&["list-envs"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    for name in ["two-context", "heartsteps", "sepsis"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn missing_config_exits_one_and_names_path() {
    let o = augope(&["run-grid", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here.json"));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"trials": 5, "no_such_key": 1}"#).unwrap();
    let o = augope(&["run-grid", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    let o = augope(&["run-grid", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = augope(&["run-grid", "--trials", "2", "--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_theorems_is_deterministic() {
    let args = ["verify-theorems", "--seed", "1", "--trials", "300"];
    let (a, b) = (augope(&args), augope(&args));
    assert!(!stdout(&a).is_empty());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 9);
}

fn grid_csv(dir: &Path, workers: &str) -> Vec<u8> {
    let out = dir.join(workers);
    let o = augope(&["run-grid", "--seed", "3", "--trials", "8", "--workers", workers, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out.join("grid_two-context.csv")).unwrap()
}

#[test]
fn grid_csv_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = grid_csv(dir.path(), "1");
    assert_eq!(one, grid_csv(dir.path(), "3"));
    assert_eq!(one, grid_csv(dir.path(), "8"));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("env,pi_b,pi_e,estimator,eps_g,delta_g,rmse,bias,std,se_rmse,se_bias,se_std,trials\n"));
    assert_eq!(text.lines().count(), 1 + 10 * 45 * 9);
}

#[test]
fn stdout_and_file_outputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = augope(&["run-grid", "--seed", "3", "--trials", "8", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let f = augope(&["run-grid", "--seed", "3", "--trials", "8", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(f.status.code(), Some(0));
    assert_eq!(o.stdout, std::fs::read(dir.path().join("grid_two-context.json")).unwrap());
}

#[test]
fn delta_writes_rows_for_the_selected_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("delta.json");
    std::fs::write(&config, r#"{"env": {"kind": "heartsteps"}, "trials": 3, "eps_grid": [0.0, 0.5], "delta_grid": [0.0]}"#).unwrap();
    let o = augope(&["delta", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("heartsteps,")));
}

#[test]
fn bad_arguments_exit_one() {
    let o = augope(&["run-grid", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xml"));
}
