//! C ABI over `sgehc`.
//!
//! Every fallible call returns an [`SgeStatus`]; on failure the message is
//! available from [`sge_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings returned to the
//! caller are released with [`sge_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sgehc::config::RunConfig;
use sgehc::hypercross::{build_hc_set, HcIndexSet};
use sgehc::metrics::ErrorReport;
use sgehc::stepper::solve_sge;
use sgehc::Error;

/// Status codes. The numeric values match the exit codes of the `sgehc`
/// binary where both exist.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgeStatus {
    Ok = 0,
    Internal = 1,
    Config = 3,
    InvalidArgument = 4,
    Numerical = 5,
    Io = 6,
    NullPointer = 7,
    Utf8 = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Index set handle.
pub struct SgeHcSet {
    inner: HcIndexSet,
}

/// Result of a solve: the error report and the `λ` it used.
pub struct SgeRun {
    report: ErrorReport,
    lambda: f64,
}

/// One report row.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SgeReportRow {
    pub time: f64,
    pub linf: f64,
    pub rms: f64,
    pub kappa: f64,
    pub residual: f64,
    pub wall_seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SgeStatus {
    match e {
        Error::Config { .. } => SgeStatus::Config,
        Error::InvalidArgument(_) | Error::EmptySet { .. } | Error::OutOfDomain { .. } => SgeStatus::InvalidArgument,
        Error::IllConditioned { .. } | Error::InsufficientBasis { .. } | Error::StepFailure { .. } => {
            SgeStatus::Numerical
        }
        Error::Io { .. } => SgeStatus::Io,
        Error::Internal(_) => SgeStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (SgeStatus, String)>) -> SgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SgeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sgehc");
            SgeStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SgeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SgeStatus, String) {
    (SgeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SgeStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SgeStatus::Utf8, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sge_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the hyperbolic-cross set of order `order_cap` in `dim` dimensions.
/// `superposition_cap` < 0 means no cap.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sge_hc_set_new(
    dim: usize,
    lambda: f64,
    order_cap: f64,
    superposition_cap: i32,
    out: *mut *mut SgeHcSet,
) -> SgeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cap = usize::try_from(superposition_cap).ok();
        let inner = build_hc_set(dim, lambda, order_cap, cap).map_err(lib)?;
        *out = Box::into_raw(Box::new(SgeHcSet { inner }));
        Ok(())
    })
}

/// Number of indices; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sge_hc_set_len(set: *const SgeHcSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// Dimension of the indices; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sge_hc_set_dim(set: *const SgeHcSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.dim())
}

/// Copies index `i` (canonical order) into `entries[0..dim]` and its weight
/// into `weight` when that is not null.
///
/// # Safety
/// `entries` must have room for `dim` values.
#[no_mangle]
pub unsafe extern "C" fn sge_hc_set_get(
    set: *const SgeHcSet,
    i: usize,
    entries: *mut i32,
    dim: usize,
    weight: *mut f64,
) -> SgeStatus {
    guard(|| {
        let s = set.as_ref().ok_or_else(|| null("set"))?;
        if entries.is_null() {
            return Err(null("entries"));
        }
        if i >= s.inner.len() {
            return Err((
                SgeStatus::OutOfRange,
                format!("index {i} out of range ({} indices)", s.inner.len()),
            ));
        }
        if dim != s.inner.dim() {
            return Err((
                SgeStatus::InvalidArgument,
                format!("buffer holds {dim} entries, indices have {}", s.inner.dim()),
            ));
        }
        let m = s.inner.indices()[i].entries();
        std::slice::from_raw_parts_mut(entries, dim).copy_from_slice(m);
        if !weight.is_null() {
            *weight = s.inner.weights()[i];
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sge_hc_set_free(set: *mut SgeHcSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Solves the problem described by a JSON run configuration (the same format
/// the `sgehc solve` command reads). Nothing is written to disk unless the
/// configuration names a checkpoint directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sge_run_solve(config_json: *const c_char, out: *mut *mut SgeRun) -> SgeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(config_json, "config_json")?;
        let cfg = RunConfig::from_json(text).map_err(lib)?;
        let problem = cfg.problem().map_err(lib)?;
        let times = cfg.resolved_times().map_err(lib)?;
        let disc = cfg.discretization(Path::new("."));
        let output = solve_sge(&problem, &disc, &times).map_err(lib)?;
        *out = Box::into_raw(Box::new(SgeRun {
            report: output.report,
            lambda: output.lambda,
        }));
        Ok(())
    })
}

/// Number of report rows; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sge_run_rows(run: *const SgeRun) -> usize {
    run.as_ref().map_or(0, |r| r.report.rows().len())
}

/// The `λ` used by the run; NaN for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sge_run_lambda(run: *const SgeRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.lambda)
}

/// # Safety
/// `run` must be a live handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn sge_run_row(run: *const SgeRun, i: usize, row: *mut SgeReportRow) -> SgeStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if row.is_null() {
            return Err(null("row"));
        }
        let rows = r.report.rows();
        let src = rows.get(i).ok_or_else(|| {
            (
                SgeStatus::OutOfRange,
                format!("row {i} out of range ({} rows)", rows.len()),
            )
        })?;
        *row = SgeReportRow {
            time: src.time,
            linf: src.linf,
            rms: src.rms,
            kappa: src.kappa,
            residual: src.residual,
            wall_seconds: src.wall_seconds,
        };
        Ok(())
    })
}

/// The report as CSV text; release it with [`sge_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sge_run_csv(run: *const SgeRun, out: *mut *mut c_char) -> SgeStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(r.report.to_csv_string()).map_err(|e| (SgeStatus::Internal, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sge_run_free(run: *mut SgeRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
