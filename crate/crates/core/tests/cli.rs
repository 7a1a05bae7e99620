mod common;

use std::process::{Command, Output};

use common::problems_dir;
use disconnect::certificate::BarrierCertificate;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disconnect"))
        .args(args)
        .env_remove("DISCONNECT_SDP_BACKEND")
        .output()
        .unwrap()
}

fn problem(name: &str) -> String {
    problems_dir().join(format!("{name}.json")).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn disconnect_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let c = cert.to_str().unwrap();
    let o = cli(&["disconnect", &problem("two_intervals"), "--degree", "3", "-o", c]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed = BarrierCertificate::from_json(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(parsed.order, 3);

    let o = cli(&["verify", c, &problem("two_intervals"), "--samples", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "Verified");

    // The same certificate says nothing about another problem.
    let o = cli(&["verify", c, &problem("one_interval")]);
    assert_eq!(o.status.code(), Some(1));

    let mut tampered = parsed.clone();
    tampered.v = tampered.v.scale(-1.0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, tampered.to_json()).unwrap();
    let o = cli(&["verify", bad.to_str().unwrap(), &problem("two_intervals"), "--samples", "200"]);
    assert_eq!(o.status.code(), Some(1));

    let o = cli(&["contour", c, "--times", "0,1", "--res", "5", "--bounds", "0:1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(csv.starts_with("t,x1,v\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn auto_verdicts_and_exit_codes() {
    let o = cli(&["auto", &problem("two_intervals")]);
    assert_eq!(o.status.code(), Some(0));
    let out: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(out["verdict"], "Disconnected");
    assert_eq!(out["degree"], 3);

    let o = cli(&["auto", &problem("one_interval"), "--strict-paper-labels"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PATH-CONNECTED"));

    let o = cli(&["auto", &problem("two_intervals"), "--dmax", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exit_code() {
    let o = Command::new(env!("CARGO_BIN_EXE_disconnect"))
        .args(["disconnect", &problem("two_intervals"), "--degree", "1"])
        .env("DISCONNECT_SDP_BACKEND", "external:false")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_inputs_fail() {
    assert_eq!(cli(&["disconnect", "/nonexistent.json", "--degree", "1"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    std::fs::write(&p, r#"{"name": "x", "n": 1}"#).unwrap();
    assert_eq!(cli(&["bound", p.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(cli(&["auto", &problem("one_interval"), "--d0", "3", "--dmax", "2"]).status.code(), Some(1));
}

#[test]
fn bound_output() {
    let o = cli(&["bound", &problem("horizontal_cut")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("UserSupplied"));
    assert!(text.contains("KurdykaDegree"));
}

#[test]
fn export_is_deterministic() {
    let a = cli(&["export-sdpa", &problem("slanted_cut"), "--degree", "2", "--program", "connect", "--box"]);
    let b = cli(&["export-sdpa", &problem("slanted_cut"), "--degree", "2", "--program", "connect", "--box"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}
