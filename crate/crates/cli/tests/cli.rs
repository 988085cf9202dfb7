use std::fs;
use std::process::{Command, Output};

fn eirm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eirm")).args(args).output().unwrap()
}

#[test]
fn grid_with_shared_minimizer_exits_zero() {
    let out = eirm(&["theory", "grid", "--c1", "0.5", "--c2", "0.5", "--step", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("equal"));
}

#[test]
fn grid_report_saved() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let out = eirm(&["theory", "grid", "--c1", "0", "--c2", "1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_dir(&out_dir).unwrap().count() >= 2);
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = \"x\"\n[model]\nwidth = 3\n").unwrap();
    let out = eirm(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = eirm(&["run", "/nonexistent/eirm.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_value_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[benchmark]\nname = \"colored_shapes\"\n[train]\nlr = -1.0\n").unwrap();
    let out = eirm(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lr"));
}

#[test]
fn gen_writes_environment_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = eirm(&[
        "gen",
        "colored_shapes",
        "--sizes",
        "50,50,20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("env1.env").exists());
    assert!(dir.path().join("test.env").exists());
}
