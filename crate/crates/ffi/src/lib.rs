//! C ABI over the calibration library.
//!
//! Every fallible function returns a [`GomStatus`]. On failure a message is
//! kept per thread and can be read with [`gom_last_error_message`].
//! Calibrators are opaque handles created by `gom_calibrator_*` constructors
//! and released with [`gom_calibrator_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gopenmax::calibrator::{recalibrate, threshold_decision, CalibrationConfig, Decision, FittedCalibrator};
use gopenmax::error::Error;
use gopenmax::evt::{fit_weibull_tail, WeibullModel};
use gopenmax::mixture::sample_mixture;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    FitFailed = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque fitted calibrator.
pub struct GomCalibrator {
    inner: FittedCalibrator,
}

/// Weibull tail model by value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GomWeibull {
    pub t: f64,
    pub lambda: f64,
    pub k: f64,
    pub tail_size: usize,
    pub n_fitted: usize,
}

/// Decision value meaning "unknown".
pub const GOM_UNKNOWN: i64 = -1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> GomStatus {
    match e {
        Error::Io { .. } => GomStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::InvalidLabel { .. } => GomStatus::Parse,
        Error::DimensionMismatch { .. } => GomStatus::DimensionMismatch,
        Error::InsufficientData { .. }
        | Error::DegenerateTail { .. }
        | Error::NonConvergence { .. }
        | Error::EmptyClass(_)
        | Error::ClassFit { .. } => GomStatus::FitFailed,
        _ => GomStatus::InvalidArgument,
    }
}

fn fail(status: GomStatus, msg: impl Into<String>) -> GomStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> GomStatus {
    fail(status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> GomStatus) -> GomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GomStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const libc::c_char, name: &str) -> Result<&'a str, GomStatus> {
    if p.is_null() {
        return Err(fail(GomStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GomStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], GomStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(GomStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_handle(calib: FittedCalibrator, out: *mut *mut GomCalibrator) -> GomStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(GomCalibrator { inner: calib })) };
    GomStatus::Ok
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gom_last_error_message() -> *const libc::c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a calibrator from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_from_json(
    json: *const libc::c_char,
    out: *mut *mut GomCalibrator,
) -> GomStatus {
    guard(|| {
        if out.is_null() {
            return fail(GomStatus::NullPointer, "out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<FittedCalibrator>(text) {
            Ok(c) => into_handle(c, out),
            Err(e) => fail(GomStatus::Parse, e.to_string()),
        }
    })
}

/// Loads a calibrator file written by `gopenmax fit`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_load(path: *const libc::c_char, out: *mut *mut GomCalibrator) -> GomStatus {
    guard(|| {
        if out.is_null() {
            return fail(GomStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(GomStatus::Io, format!("{path}: {e}")),
        };
        match serde_json::from_str::<FittedCalibrator>(&text) {
            Ok(c) => into_handle(c, out),
            Err(e) => fail(GomStatus::Parse, format!("{path}: {e}")),
        }
    })
}

/// Fits a calibrator on an activation dump. `config_json` may be NULL for
/// the default configuration.
///
/// # Safety
/// `dump_path` and a non-null `config_json` must be NUL-terminated strings;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_fit_dump(
    dump_path: *const libc::c_char,
    config_json: *const libc::c_char,
    out: *mut *mut GomCalibrator,
) -> GomStatus {
    guard(|| {
        if out.is_null() {
            return fail(GomStatus::NullPointer, "out is null");
        }
        let path = match str_arg(dump_path, "dump_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let config = if config_json.is_null() {
            CalibrationConfig::default()
        } else {
            let text = match str_arg(config_json, "config_json") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => return fail(GomStatus::Parse, e.to_string()),
            }
        };
        let records = match gopenmax::activations::load_dump(path) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        match gopenmax::calibrator::fit(&records, &config) {
            Ok(c) => into_handle(c, out),
            Err(e) => from_error(e),
        }
    })
}

/// Releases a calibrator. NULL is ignored.
///
/// # Safety
/// `calib` must come from a `gom_calibrator_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_free(calib: *mut GomCalibrator) {
    if !calib.is_null() {
        drop(Box::from_raw(calib));
    }
}

/// Activation vector length the calibrator expects; 0 for NULL.
///
/// # Safety
/// `calib` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_dimension(calib: *const GomCalibrator) -> usize {
    calib.as_ref().map_or(0, |c| c.inner.dimension())
}

/// Length of the probability vector `gom_calibrator_recalibrate` writes; 0 for NULL.
///
/// # Safety
/// `calib` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_num_outputs(calib: *const GomCalibrator) -> usize {
    calib.as_ref().map_or(0, |c| c.inner.n_outputs())
}

/// Recalibrates one activation vector. Writes the probabilities (unknown
/// last) into `probs` and the decision (class index or `GOM_UNKNOWN`) into
/// `decision`, which may be NULL.
///
/// # Safety
/// `calib` must be a live handle, `av` must point to `av_len` doubles and
/// `probs` to `probs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_recalibrate(
    calib: *const GomCalibrator,
    av: *const f64,
    av_len: usize,
    probs: *mut f64,
    probs_len: usize,
    decision: *mut i64,
) -> GomStatus {
    guard(|| {
        let Some(calib) = calib.as_ref() else {
            return fail(GomStatus::NullPointer, "calibrator is null");
        };
        let av = match slice_arg(av, av_len, "av") {
            Ok(a) => a,
            Err(s) => return s,
        };
        let n = calib.inner.n_outputs();
        if probs.is_null() {
            return fail(GomStatus::NullPointer, "probs is null");
        }
        if probs_len < n {
            return fail(GomStatus::BufferTooSmall, format!("probs holds {probs_len}, need {n}"));
        }
        match recalibrate(av, &calib.inner) {
            Ok(o) => {
                ptr::copy_nonoverlapping(o.probabilities.as_ptr(), probs, n);
                if let Some(d) = decision.as_mut() {
                    *d = i64::from(o.decision);
                }
                GomStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Serialises the calibrator to JSON. Free the string with [`gom_string_free`].
///
/// # Safety
/// `calib` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gom_calibrator_to_json(calib: *const GomCalibrator, out: *mut *mut libc::c_char) -> GomStatus {
    guard(|| {
        let Some(calib) = calib.as_ref() else {
            return fail(GomStatus::NullPointer, "calibrator is null");
        };
        if out.is_null() {
            return fail(GomStatus::NullPointer, "out is null");
        }
        let json = match serde_json::to_string(&calib.inner) {
            Ok(j) => j,
            Err(e) => return fail(GomStatus::Parse, e.to_string()),
        };
        match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                GomStatus::Ok
            }
            Err(e) => fail(GomStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gom_string_free(s: *mut libc::c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fits a Weibull model to the `tail_size` largest distances.
///
/// # Safety
/// `distances` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gom_weibull_fit(
    distances: *const f64,
    len: usize,
    tail_size: usize,
    out: *mut GomWeibull,
) -> GomStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(GomStatus::NullPointer, "out is null");
        };
        let xs = match slice_arg(distances, len, "distances") {
            Ok(x) => x,
            Err(s) => return s,
        };
        match fit_weibull_tail(xs, tail_size) {
            Ok(m) => {
                *out = GomWeibull {
                    t: m.translation(),
                    lambda: m.scale(),
                    k: m.shape(),
                    tail_size: m.tail_size(),
                    n_fitted: m.n_fitted(),
                };
                GomStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// CDF of `model` at `x`. Returns NaN for a NULL or invalid model.
///
/// # Safety
/// `model` must be NULL or point to a `GomWeibull`.
#[no_mangle]
pub unsafe extern "C" fn gom_weibull_cdf(model: *const GomWeibull, x: f64) -> f64 {
    let Some(m) = model.as_ref() else {
        set_error("model is null");
        return f64::NAN;
    };
    match WeibullModel::new(m.t, m.lambda, m.k, m.tail_size, m.n_fitted) {
        Ok(w) => w.cdf(x),
        Err(e) => {
            set_error(e.to_string());
            f64::NAN
        }
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gom_openness(n_train: usize, n_test: usize, n_r: usize, out: *mut f64) -> GomStatus {
    let Some(out) = out.as_mut() else {
        return fail(GomStatus::NullPointer, "out is null");
    };
    match gopenmax::evaluation::openness(n_train, n_test, n_r) {
        Ok(o) => {
            *out = o;
            GomStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Writes an `n`-component mixture vector for `seed` into `out`.
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gom_sample_mixture(
    n: usize,
    seed: u64,
    sigma: f64,
    out: *mut f64,
    out_len: usize,
) -> GomStatus {
    guard(|| {
        if out.is_null() {
            return fail(GomStatus::NullPointer, "out is null");
        }
        if out_len < n {
            return fail(GomStatus::BufferTooSmall, format!("out holds {out_len}, need {n}"));
        }
        match sample_mixture(n, seed, sigma) {
            Ok(m) => {
                ptr::copy_nonoverlapping(m.m.as_ptr(), out, n);
                GomStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Threshold decision over a probability vector: the argmax class index, or
/// `GOM_UNKNOWN` when the maximum is below `epsilon` or, with
/// `last_is_unknown`, when the last position wins.
///
/// # Safety
/// `probs` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gom_decide(
    probs: *const f64,
    len: usize,
    epsilon: f64,
    last_is_unknown: bool,
    out: *mut i64,
) -> GomStatus {
    let Some(out) = out.as_mut() else {
        return fail(GomStatus::NullPointer, "out is null");
    };
    let p = match slice_arg(probs, len, "probs") {
        Ok(p) => p,
        Err(s) => return s,
    };
    if p.is_empty() {
        return fail(GomStatus::InvalidArgument, "probs is empty");
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return fail(GomStatus::InvalidArgument, format!("epsilon {epsilon} outside [0, 1]"));
    }
    *out = match threshold_decision(p, epsilon, last_is_unknown) {
        Decision::Unknown => GOM_UNKNOWN,
        Decision::Class(c) => c as i64,
    };
    GomStatus::Ok
}
