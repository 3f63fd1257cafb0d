use std::path::Path;
use std::process::{Command, Output};

fn finconn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finconn")).arg("--out").arg(out).args(args).output().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn walk_u_table_holds_one_eighth() {
    let dir = tempfile::tempdir().unwrap();
    let o = finconn(dir.path(), &["walk", "u", "--law", "srw", "--n", "4", "--start", "0"]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("walk_u.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "4,2,1/8"), "{csv}");
    assert!(dir.path().join("walk_u.manifest.json").exists());
}

#[test]
fn float_walk_table_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let o = finconn(dir.path(), &["walk", "u", "--law", "srw", "--n", "4", "--exact", "false"]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("walk_u.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "4,2,1.25e-1"), "{csv}");
}

#[test]
fn renewal_function_of_srw_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    assert!(finconn(dir.path(), &["renewal", "U", "--law", "srw", "--zmax", "5"]).status.success());
    let v = read_json(&dir.path().join("renewal_U.json"));
    assert_eq!(v["U"], serde_json::json!([1.0, 2.0, 3.0, 4.0, 5.0]));
}

#[test]
fn local_limit_verdict_at_n_2000() {
    let dir = tempfile::tempdir().unwrap();
    assert!(finconn(dir.path(), &["theorem", "zn", "--law", "srw", "--n", "2000"]).status.success());
    let v = read_json(&dir.path().join("theorem_zn.json"));
    assert_eq!(v["verdict"], "pass");
    assert!((v["limit_estimate"].as_f64().unwrap() - 1.0).abs() < 0.03);
}

#[test]
fn manifest_digests_every_output() {
    let dir = tempfile::tempdir().unwrap();
    assert!(finconn(dir.path(), &["--seed", "9", "oracle", "enumerate", "--n", "1"]).status.success());
    let m = read_json(&dir.path().join("oracle_enumerate.manifest.json"));
    assert_eq!(m["seed"], 9);
    for out in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join(out["file"].as_str().unwrap())).unwrap();
        assert_eq!(out["sha256"], finconn_cli::manifest::sha256_hex(&bytes));
    }
    assert_eq!(m["command"][0], "--out");
    assert!(m["config"]["oracle"].is_object());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(finconn(dir.path(), &["walk", "u", "--law", "nope"]).status.code(), Some(2));
    assert_eq!(finconn(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(finconn(dir.path(), &["renewal", "f", "--law", "uniform3"]).status.code(), Some(2));
    // A window that cannot hold the walk leaks mass: a resource failure.
    let o = finconn(dir.path(), &["walk", "q", "--law", "srw", "--n", "30", "--exact", "false", "--window", "-2", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 4, "renewal": {"z_max": 3}}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_finconn"))
        .env("FINCONN_CONFIG", &cfg)
        .env("FINCONN_OUT", dir.path())
        .args(["renewal", "U"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("renewal_U.json"))["U"], serde_json::json!([1.0, 2.0, 3.0]));
    assert_eq!(read_json(&dir.path().join("renewal_U.manifest.json"))["seed"], 4);

    std::fs::write(&cfg, r#"{"renewal": {"zmax": 3}}"#).unwrap();
    let o = finconn(dir.path(), &["--config", cfg.to_str().unwrap(), "renewal", "U"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zmax"));
}

#[test]
fn flags_override_environment_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_finconn"))
        .env("FINCONN_SEED", "5")
        .args(["--seed", "6", "--out"])
        .arg(dir.path())
        .args(["oracle", "enumerate"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("oracle_enumerate.manifest.json"))["seed"], 6);
}
