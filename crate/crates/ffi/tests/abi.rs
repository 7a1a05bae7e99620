use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use disconnect_ffi::*;

fn problem_json(name: &str) -> CString {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(format!("{name}.json"));
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dc_last_error_message()) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut DcProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dc_problem_from_json(problem_json(name).as_ptr(), &mut p) }, DcStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn certify_round_trip_and_verify() {
    unsafe {
        let p = load("two_intervals");
        assert_eq!(dc_problem_dimension(p), 1);
        let mut status = DcSdpStatus::Unknown;
        let mut cert = ptr::null_mut();
        assert_eq!(dc_disconnect(p, 2, true, &mut status, &mut cert), DcStatus::Ok);
        assert_eq!(status, DcSdpStatus::Infeasible);
        assert!(cert.is_null());

        assert_eq!(dc_disconnect(p, 3, true, &mut status, &mut cert), DcStatus::Ok);
        assert_eq!(status, DcSdpStatus::Feasible);
        let mut v0 = 0.0;
        assert_eq!(dc_certificate_evaluate(cert, [0.0, 0.2].as_ptr(), 2, &mut v0), DcStatus::Ok);
        assert!(v0 >= 1.0 - 1e-6);

        let mut text = ptr::null_mut();
        assert_eq!(dc_certificate_to_json(cert, &mut text), DcStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dc_certificate_from_json(text, &mut back), DcStatus::Ok);
        dc_string_free(text);

        let mut verdict = DcVerdict::ResidualViolation;
        assert_eq!(dc_verify(back, p, 1000, 1, 1e-6, &mut verdict), DcStatus::Ok);
        assert_eq!(verdict, DcVerdict::Verified);

        let other = load("one_interval");
        assert_eq!(dc_verify(back, other, 10, 1, 1e-6, &mut verdict), DcStatus::FingerprintMismatch);
        assert!(last_error().contains("fingerprint"));

        dc_certificate_free(cert);
        dc_certificate_free(back);
        dc_problem_free(p);
        dc_problem_free(other);
    }
}

#[test]
fn meta_algorithm_and_bound() {
    unsafe {
        let p = load("one_interval");
        let mut verdict = DcRunVerdict::Exhausted;
        let mut order = 0;
        assert_eq!(dc_meta_algorithm(p, 1, 3, &mut verdict, &mut order), DcStatus::Ok);
        assert_eq!(verdict, DcRunVerdict::RelaxationFeasible);
        assert_eq!(order, 1);
        assert_eq!(dc_meta_algorithm(p, 3, 1, &mut verdict, &mut order), DcStatus::InvalidArgument);
        dc_problem_free(p);

        let mut t = 0.0;
        assert_eq!(dc_kurdyka_time_bound(2, 2, &mut t), DcStatus::Ok);
        assert!((t - 48.0).abs() < 1e-9);
        assert_eq!(dc_kurdyka_time_bound(1, 2, &mut t), DcStatus::InvalidArgument);
    }
}

#[test]
fn bad_input_is_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(dc_problem_from_json(ptr::null(), &mut p), DcStatus::NullPointer);
        let bad = CString::new("{\"name\": 1}").unwrap();
        assert_eq!(dc_problem_from_json(bad.as_ptr(), &mut p), DcStatus::InvalidProblem);
        assert!(p.is_null());
        assert!(!last_error().is_empty());
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(dc_problem_from_json(invalid.as_ptr().cast(), &mut p), DcStatus::InvalidUtf8);
        assert_eq!(dc_problem_from_json(bad.as_ptr(), ptr::null_mut()), DcStatus::NullPointer);
        let mut status = DcSdpStatus::Unknown;
        let mut cert = ptr::null_mut();
        assert_eq!(dc_disconnect(ptr::null(), 1, true, &mut status, &mut cert), DcStatus::NullPointer);
        assert_eq!(dc_problem_dimension(ptr::null()), 0);
        dc_problem_free(ptr::null_mut());
        dc_certificate_free(ptr::null_mut());
        dc_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/disconnect.h");
    assert!(std::fs::read_to_string(&header).unwrap().contains("dc_problem_from_json"));
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .status()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(status.success());
}
