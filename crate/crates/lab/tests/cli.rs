//! The `boa-lab` binary: subcommands, output files and exit codes.

mod common;

use std::process::Command;

use serde_json::json;

fn boa_lab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_boa-lab"));
    c.env("BOA_LAB_THREADS", "1");
    c
}

#[test]
fn validate_accepts_bundled_and_rejects_malformed() {
    let out = boa_lab().args(["validate", "st2_order1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let mut v = common::tiny_avoided_crossing("out");
    v["epsilons"] = json!([0.05, 0.1, 0.2, 0.4]);
    let p = common::write(dir.path(), "bad.json", &v);
    let out = boa_lab().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilons"));

    let out = boa_lab().args(["validate", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_reports_and_exits_by_status() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let ok = common::write(dir.path(), "ok.json", &common::tiny_constant_frame(out_dir.to_str().unwrap()));
    let out = boa_lab().arg("run").arg(&ok).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(out_dir.join("tiny_constant.json").exists() && out_dir.join("tiny_constant.csv").exists());

    // an unreachable R² floor makes every fit inconclusive
    let mut v = common::tiny_avoided_crossing(out_dir.to_str().unwrap());
    v["study"]["orders"] = json!([1]);
    v["tolerances"] = json!({ "min_r_squared": 0.999999 });
    let inc = common::write(dir.path(), "inc.json", &v);
    let out = boa_lab().arg("run").arg(&inc).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("inconclusive"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("tiny.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "inconclusive");
    assert!(report["series"][0]["slope"].is_null());
}

#[test]
fn out_flag_overrides_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write(dir.path(), "c.json", &common::tiny_constant_frame("unused"));
    let target = dir.path().join("elsewhere");
    let out = boa_lab().arg("run").arg(&cfg).arg("--out").arg(&target).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("tiny_constant.csv").exists());
}

#[test]
fn oracles_list_and_run() {
    let out = boa_lab().args(["oracle", "list"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["conical-forms", "free-gaussian", "coherent-state", "adi-dia", "st2_order1"] {
        assert!(text.contains(name));
    }
    let out = boa_lab().args(["oracle", "free-gaussian"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("closed-form free Gaussian"));
    let out = boa_lab().args(["oracle", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
