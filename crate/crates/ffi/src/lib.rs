//! C ABI for the shortrate engine: build a model handle from its JSON
//! snapshot, then query closed-form quantities from it.
//!
//! Conventions:
//! - Every fallible function returns an [`SrStatus`]; results come back
//!   through out-pointers that are written only on `SR_OK`.
//! - Strings are NUL-terminated UTF-8.
//! - A model handle is immutable after creation and safe to share across
//!   threads; release it exactly once with [`sr_model_free`].
//! - On failure, [`sr_last_error`] returns a thread-local message for the
//!   most recent error raised by this library on the calling thread. The
//!   pointer stays valid until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shortrate::composite::{CompositeModel, ModelSpec};
use shortrate::Error;

/// Result codes. Nonzero values group errors the same way the companion
/// CLI's process exit codes do, with dedicated codes for null pointers and
/// internal faults.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrStatus {
    /// Success.
    SrOk = 0,
    /// A required pointer argument was null.
    SrNullPointer = 1,
    /// Invalid input: malformed JSON, bad UTF-8, or arguments outside the
    /// model's domain.
    SrInvalidInput = 2,
    /// Inputs parse but contradict each other or leave required data
    /// missing.
    SrDataError = 3,
    /// An iterative routine failed to converge.
    SrNoConvergence = 4,
    /// A pipeline stage was invoked before its prerequisite.
    SrMissingStage = 5,
    /// An internal fault was caught at the language boundary.
    SrInternal = 6,
}

/// Opaque model handle created by [`sr_model_from_json`].
pub struct SrModel {
    model: CompositeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs removed");
    });
}

fn status_of(err: &Error) -> SrStatus {
    match err.exit_code() {
        3 => SrStatus::SrDataError,
        4 => SrStatus::SrNoConvergence,
        5 => SrStatus::SrMissingStage,
        _ => SrStatus::SrInvalidInput,
    }
}

fn fail(status: SrStatus, msg: &str) -> SrStatus {
    set_error(msg);
    status
}

fn fail_with(err: &Error) -> SrStatus {
    fail(status_of(err), &err.to_string())
}

/// Run a body, translating panics into `SR_INTERNAL` instead of letting
/// them unwind across the C boundary.
fn guarded(body: impl FnOnce() -> SrStatus) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SrStatus::SrInternal, "internal fault caught at the C boundary"),
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SrStatus> {
    if ptr.is_null() {
        return Err(fail(SrStatus::SrNullPointer, &format!("{what} pointer is null")));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        fail(
            SrStatus::SrInvalidInput,
            &format!("{what} is not valid UTF-8"),
        )
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on the calling thread, or an empty
/// string when none occurred. Valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn sr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse a model snapshot (the JSON produced by calibration, or
/// handwritten) and build a pricing handle from it.
///
/// On `SR_OK`, `*out` owns the handle; release it with [`sr_model_free`].
///
/// # Safety
/// `json` must be null or NUL-terminated; `out` must be null or valid for
/// writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_model_from_json(
    json: *const c_char,
    out: *mut *mut SrModel,
) -> SrStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SrStatus::SrNullPointer, "out pointer is null");
        }
        let text = match unsafe { read_str(json, "json") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let spec = match ModelSpec::from_json(text) {
            Ok(s) => s,
            Err(e) => return fail_with(&e),
        };
        let model = match CompositeModel::from_spec(&spec) {
            Ok(m) => m,
            Err(e) => return fail_with(&e),
        };
        unsafe { out.write(Box::into_raw(Box::new(SrModel { model }))) };
        SrStatus::SrOk
    })
}

/// Release a handle created by [`sr_model_from_json`]. Passing null is a
/// no-op; passing the same handle twice is undefined behavior.
///
/// # Safety
/// `model` must be null or a pointer obtained from [`sr_model_from_json`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_model_free(model: *mut SrModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Zero-coupon bond price `B(0, T)` for a maturity in year fractions from
/// the model's anchor date.
///
/// # Safety
/// `model` must be a live handle or null; `out` must be null or valid for
/// writing one double.
#[no_mangle]
pub unsafe extern "C" fn sr_model_bond_price(
    model: *const SrModel,
    maturity_years: f64,
    out: *mut f64,
) -> SrStatus {
    guarded(|| {
        let Some(handle) = (unsafe { model.as_ref() }) else {
            return fail(SrStatus::SrNullPointer, "model pointer is null");
        };
        if out.is_null() {
            return fail(SrStatus::SrNullPointer, "out pointer is null");
        }
        let state = handle.model.initial_state();
        match handle.model.bond_price(&state, 0.0, maturity_years) {
            Ok(price) => {
                unsafe { out.write(price) };
                SrStatus::SrOk
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Expected overnight rate on a date (`YYYY-MM-DD`), as seen from the
/// anchor date.
///
/// # Safety
/// `model` must be a live handle or null; `date_iso` must be null or
/// NUL-terminated; `out` must be null or valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn sr_model_expected_rate_on(
    model: *const SrModel,
    date_iso: *const c_char,
    out: *mut f64,
) -> SrStatus {
    guarded(|| {
        let Some(handle) = (unsafe { model.as_ref() }) else {
            return fail(SrStatus::SrNullPointer, "model pointer is null");
        };
        if out.is_null() {
            return fail(SrStatus::SrNullPointer, "out pointer is null");
        }
        let text = match unsafe { read_str(date_iso, "date") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let date = match text.parse() {
            Ok(d) => d,
            Err(_) => {
                return fail(
                    SrStatus::SrInvalidInput,
                    &format!("bad date {text:?}; expected YYYY-MM-DD"),
                )
            }
        };
        let state = handle.model.initial_state();
        match handle.model.expected_rate_on(&state, date) {
            Ok(rate) => {
                unsafe { out.write(rate) };
                SrStatus::SrOk
            }
            Err(e) => fail_with(&e),
        }
    })
}
