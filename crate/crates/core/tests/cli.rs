//! The `purify` binary: exit codes, output directory resolution, config files.

use std::path::Path;
use std::process::{Command, Output};

fn purify(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_purify"));
    cmd.args(args).env_remove("PURIFY_OUT");
    if let Some(dir) = env_out {
        cmd.env("PURIFY_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const STAB: [&str; 7] = ["stabilizer", "--qubits", "4", "--steps", "500", "--trajectories", "20"];

#[test]
fn env_var_sets_output_dir() {
    let d = tempfile::tempdir().unwrap();
    let o = purify(&STAB, Some(d.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("stabilizer.csv").exists());
    let csv = std::fs::read_to_string(d.path().join("stabilizer.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,entropy_bits,case"));
    assert_eq!(manifest(d.path())["config"]["experiment"]["kind"], "stabilizer");
}

#[test]
fn out_flag_beats_env_var() {
    let env = tempfile::tempdir().unwrap();
    let flag = tempfile::tempdir().unwrap();
    let mut args = STAB.to_vec();
    args.extend(["--out", flag.path().to_str().unwrap()]);
    assert_eq!(code(&purify(&args, Some(env.path()))), 0);
    assert!(flag.path().join("manifest.json").exists());
    assert!(!env.path().join("manifest.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": {"kind": "stabilizer", "params": {"qubits": 3, "steps": 200, "trajectories": 10}}, "seed": 9}"#,
    )
    .unwrap();
    let out = d.path().join("out");
    let o = purify(
        &["stabilizer", "--config", cfg.to_str().unwrap(), "--qubits", "5", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["experiment"]["params"]["qubits"], 5);
    assert_eq!(m["config"]["experiment"]["params"]["steps"], 200);
    assert_eq!(m["config"]["seed"], 9);
}

#[test]
fn same_seed_same_bytes_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, w: &str| {
        let mut args = vec!["fermion", "--modes", "6", "--steps", "36", "--walkers", "8", "--variant", "conserving"];
        args.extend(["--workers", w, "--out", dir.to_str().unwrap()]);
        let o = purify(&args, None);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    for f in ["fermion.csv", "fermion_summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    // odd dimension
    assert_eq!(code(&purify(&["manybody", "--dimension", "7", "--steps", "3", "--out", out], None)), 2);
    // missing required value
    assert_eq!(code(&purify(&["stabilizer", "--qubits", "4", "--out", out], None)), 2);
    // unknown flag
    assert_eq!(code(&purify(&["stabilizer", "--bogus", "1"], None)), 2);
    // unreadable and malformed config files
    assert_eq!(code(&purify(&["verify", "--config", "/nonexistent/x.json"], None)), 2);
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": {"kind": "stabilizer", "params": {"qubits": "four"}}}"#).unwrap();
    let o = purify(&["stabilizer", "--config", bad.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.params.qubits"));
    let vbad = d.path().join("verify.json");
    std::fs::write(&vbad, r#"{"seed": 1, "moment_sampels": 10}"#).unwrap();
    assert_eq!(code(&purify(&["verify", "--config", vbad.to_str().unwrap()], None)), 2);
}

#[test]
fn runtime_failure_exits_1() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let mut args = STAB.to_vec();
    args.extend(["--out", blocker.to_str().unwrap()]);
    assert_eq!(code(&purify(&args, None)), 1);
}

#[test]
fn verify_suite_prints_pass_lines() {
    let d = tempfile::tempdir().unwrap();
    let o = purify(&["verify", "--suite", "fermion-oracle", "--suite", "dyson-identity"], Some(d.path()));
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS fermion-oracle"), "{stdout}");
    assert!(stdout.contains("PASS dyson-identity"), "{stdout}");
    assert!(d.path().join("verify_report.json").exists());
}
