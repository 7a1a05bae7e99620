//! C interface to the disconnect library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`DcStatus`]; on failure, [`dc_last_error_message`] describes the error.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use disconnect::certificate::BarrierCertificate;
use disconnect::driver::{meta_algorithm, solve_barrier, MetaOptions, RunVerdict};
use disconnect::horizon::kurdyka_time_bound;
use disconnect::sdp::{ClarabelBackend, SdpStatus, SolverConfig};
use disconnect::semialg::{parse_problem, ProblemInstance};
use disconnect::verify::{verify, Verdict};
use disconnect::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidProblem = 3,
    InvalidArgument = 4,
    SolverFailure = 5,
    NotFeasible = 6,
    FingerprintMismatch = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcSdpStatus {
    Feasible = 0,
    Infeasible = 1,
    Unknown = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcVerdict {
    Verified = 0,
    MarginViolation = 1,
    ResidualViolation = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcRunVerdict {
    Disconnected = 0,
    RelaxationFeasible = 1,
    Exhausted = 2,
}

/// Opaque problem handle.
pub struct DcProblem(ProblemInstance);

/// Opaque certificate handle.
pub struct DcCertificate(BarrierCertificate);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(e: &Error) -> DcStatus {
    match e {
        Error::InvalidProblem(_) | Error::Json(_) => DcStatus::InvalidProblem,
        Error::InvalidArgument(_) | Error::OrderTooSmall { .. } | Error::Unsupported(_) => {
            DcStatus::InvalidArgument
        }
        Error::Backend(_) | Error::MalformedSdp(_) => DcStatus::SolverFailure,
        Error::NotFeasible(_) => DcStatus::NotFeasible,
        Error::FingerprintMismatch { .. } => DcStatus::FingerprintMismatch,
        _ => DcStatus::Other,
    }
}

/// Runs `f`, turning errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), (DcStatus, String)>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("panic inside the library");
            DcStatus::Panic
        }
    }
}

fn lib<T>(r: disconnect::Result<T>) -> Result<T, (DcStatus, String)> {
    r.map_err(|e| (code_of(&e), e.to_string()))
}

fn null(what: &str) -> (DcStatus, String) {
    (DcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (DcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON problem document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_problem_from_json(json: *const c_char, out: *mut *mut DcProblem) -> DcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let p = lib(parse_problem(read_str(json, "json")?))?;
        *out = Box::into_raw(Box::new(DcProblem(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`dc_problem_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_problem_free(p: *mut DcProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// State dimension of a problem, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn dc_problem_dimension(p: *const DcProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.n)
}

/// Solves the barrier program of order `order`. `cert` receives a
/// certificate when `status` is `Feasible` and null otherwise.
///
/// # Safety
/// `problem` must be a live handle; `status` and `cert` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dc_disconnect(
    problem: *const DcProblem,
    order: u32,
    eliminate_controls: bool,
    status: *mut DcSdpStatus,
    cert: *mut *mut DcCertificate,
) -> DcStatus {
    guard(|| {
        let status = out_ptr(status, "status")?;
        let cert = out_ptr(cert, "cert")?;
        *cert = ptr::null_mut();
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let (s, c, _) = lib(solve_barrier(
            &p.0,
            order as usize,
            eliminate_controls,
            &ClarabelBackend::default(),
            &SolverConfig::default(),
        ))?;
        *status = match s {
            SdpStatus::Feasible => DcSdpStatus::Feasible,
            SdpStatus::Infeasible => DcSdpStatus::Infeasible,
            SdpStatus::Unknown => DcSdpStatus::Unknown,
        };
        if let Some(c) = c {
            *cert = Box::into_raw(Box::new(DcCertificate(c)));
        }
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_certificate_from_json(
    json: *const c_char,
    out: *mut *mut DcCertificate,
) -> DcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = lib(BarrierCertificate::from_json(read_str(json, "json")?))?;
        *out = Box::into_raw(Box::new(DcCertificate(c)));
        Ok(())
    })
}

/// Serializes a certificate. Release the string with [`dc_string_free`].
///
/// # Safety
/// `cert` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_certificate_to_json(cert: *const DcCertificate, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        *out = to_c_string(c.0.to_json());
        Ok(())
    })
}

/// Evaluates `v(t, x)` at `point = (t, x₁, …, xₙ)` of length `len`.
///
/// # Safety
/// `cert` must be a live handle, `point` must hold `len` doubles and `out`
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_certificate_evaluate(
    cert: *const DcCertificate,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        if point.is_null() {
            return Err(null("point"));
        }
        let xs = std::slice::from_raw_parts(point, len);
        *out = lib(c.0.v.evaluate(xs))?;
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_certificate_free(c: *mut DcCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Re-checks a certificate by sampling and by its algebraic identities.
///
/// # Safety
/// Handles must be live and `verdict` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_verify(
    cert: *const DcCertificate,
    problem: *const DcProblem,
    samples: usize,
    seed: u64,
    tau: f64,
    verdict: *mut DcVerdict,
) -> DcStatus {
    guard(|| {
        let verdict = out_ptr(verdict, "verdict")?;
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let report = lib(verify(&c.0, &p.0, samples, seed, tau))?;
        *verdict = match report.verdict {
            Verdict::Verified => DcVerdict::Verified,
            Verdict::MarginViolation => DcVerdict::MarginViolation,
            Verdict::ResidualViolation => DcVerdict::ResidualViolation,
        };
        Ok(())
    })
}

/// Alternates barrier and moment programs for orders `d0..=d_max`.
/// `order` receives the deciding order, or 0 when exhausted.
///
/// # Safety
/// `problem` must be a live handle; `verdict` and `order` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dc_meta_algorithm(
    problem: *const DcProblem,
    d0: u32,
    d_max: u32,
    verdict: *mut DcRunVerdict,
    order: *mut u32,
) -> DcStatus {
    guard(|| {
        let verdict = out_ptr(verdict, "verdict")?;
        let order = out_ptr(order, "order")?;
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let run = lib(meta_algorithm(
            &p.0,
            d0 as usize,
            d_max as usize,
            &ClarabelBackend::default(),
            &MetaOptions::default(),
        ))?;
        *verdict = match run.verdict {
            RunVerdict::Disconnected => DcRunVerdict::Disconnected,
            RunVerdict::RelaxationFeasible => DcRunVerdict::RelaxationFeasible,
            RunVerdict::Exhausted => DcRunVerdict::Exhausted,
        };
        *order = run.degree.map_or(0, |d| d as u32);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_kurdyka_time_bound(n: u32, deg: u32, out: *mut f64) -> DcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = lib(kurdyka_time_bound(n as usize, deg as usize))?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
