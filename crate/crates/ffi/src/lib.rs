//! C ABI for the screenaudit library.
//!
//! Every function is callable from C (and anything with a C FFI) via the
//! generated `include/screenaudit.h`. The surface follows one convention:
//!
//! * Datasets live behind the opaque handle [`SaDataset`], created by
//!   [`sa_dataset_load`] and released by [`sa_dataset_free`].
//! * Fallible calls return an [`SaStatus`] code and write results through
//!   out-pointers; [`SA_STATUS_OK`](SaStatus::Ok) means every out-pointer
//!   was filled.
//! * On failure, a human-readable message is stored per thread and can be
//!   read with [`sa_last_error`] until the next fallible call.
//! * Strings returned by the library (`char*` out-pointers) are owned by
//!   the caller and must be released with [`sa_string_free`].
//!
//! All pointers must be valid for the duration of the call; passing null
//! where a value is required yields
//! [`SA_STATUS_NULL_ARGUMENT`](SaStatus::NullArgument) rather than
//! undefined behavior. Panics are caught at the boundary and reported as
//! [`SA_STATUS_PANIC`](SaStatus::Panic).

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

use screenaudit::adverse::{self, AuditParams, GroupPositionStats, ImpactSummary};
use screenaudit::dataset::{self, SchemaMapping};
use screenaudit::{report, stats, Error};

/// Status code returned by every fallible function in this library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStatus {
    /// Success; all out-pointers are filled.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// Input file or field failed to parse.
    Parse = 4,
    /// An argument or configuration value is out of range.
    InvalidInput = 5,
    /// No data left to operate on.
    EmptyInput = 6,
    /// A record lacks a value the operation needs.
    MissingValue = 7,
    /// A calibration target cannot be reached.
    Infeasible = 8,
    /// Internal panic caught at the FFI boundary.
    Panic = 9,
}

/// Opaque handle to a loaded, binarized application dataset.
pub struct SaDataset {
    records: Vec<dataset::ApplicationRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(err: &Error) -> SaStatus {
    match err {
        Error::Io { .. } => SaStatus::Io,
        Error::Csv { .. }
        | Error::Json { .. }
        | Error::MissingColumn { .. }
        | Error::UnknownColumn { .. }
        | Error::Parse { .. }
        | Error::MergeCycle { .. } => SaStatus::Parse,
        Error::InvalidArgument(_) | Error::InvalidConfig(_) => SaStatus::InvalidInput,
        Error::EmptyInput(_) => SaStatus::EmptyInput,
        Error::MissingValue(_) => SaStatus::MissingValue,
        Error::Infeasible(_) => SaStatus::Infeasible,
    }
}

fn fail(err: &Error) -> SaStatus {
    set_error(err.to_string());
    status_of(err)
}

fn fail_null(name: &str) -> SaStatus {
    set_error(format!("required argument {name} is null"));
    SaStatus::NullArgument
}

/// Clear the error slot, run `body`, and catch panics. Every public entry
/// point funnels through here so a poisoned call can never unwind into C.
fn guarded(body: impl FnOnce() -> SaStatus) -> SaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {what}"));
            SaStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be non-null and point to a NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SaStatus> {
    if ptr.is_null() {
        return Err(fail_null(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("argument {name} is not valid UTF-8"));
        SaStatus::InvalidUtf8
    })
}

fn give_string(out: *mut *mut c_char, s: String) -> SaStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(_) => {
            set_error("result contained an interior NUL byte".into());
            return SaStatus::InvalidInput;
        }
    };
    unsafe { *out = c.into_raw() };
    SaStatus::Ok
}

/// Library version as a static NUL-terminated string. Never freed.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null if the
/// last call succeeded. The pointer is valid until the next fallible call
/// on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn sa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Release a string returned through a `char*` out-pointer. Null is a
/// safe no-op.
///
/// # Safety
/// `s` must be a pointer previously returned by this library through an
/// out-parameter, and must not be used after this call.
#[no_mangle]
pub unsafe extern "C" fn sa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load an applications CSV (canonical column names), binarize scores at
/// `threshold`, and return a dataset handle through `out_dataset`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_dataset` a valid
/// pointer. On success the handle must be released with
/// [`sa_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_load(
    path: *const c_char,
    threshold: f64,
    out_dataset: *mut *mut SaDataset,
) -> SaStatus {
    guarded(|| {
        if out_dataset.is_null() {
            return fail_null("out_dataset");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let mut records = match dataset::load_dataset(path, &SchemaMapping::default()) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        if let Err(e) = dataset::binarize(&mut records, threshold) {
            return fail(&e);
        }
        *out_dataset = Box::into_raw(Box::new(SaDataset { records }));
        SaStatus::Ok
    })
}

/// Release a dataset handle. Null is a safe no-op.
///
/// # Safety
/// `dataset` must be a handle from [`sa_dataset_load`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_free(dataset: *mut SaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of application records in the dataset.
///
/// # Safety
/// `dataset` must be a live handle from [`sa_dataset_load`]; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_len(dataset: *const SaDataset) -> usize {
    if dataset.is_null() {
        0
    } else {
        (*dataset).records.len()
    }
}

/// Number of distinct applicants in the dataset.
///
/// # Safety
/// `dataset` must be a live handle from [`sa_dataset_load`]; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_n_applicants(dataset: *const SaDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    (*dataset)
        .records
        .iter()
        .map(|r| r.applicant_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Serialize)]
struct AuditReport {
    rows: Vec<GroupPositionStats>,
    summary: ImpactSummary,
}

/// Run the per-position adverse-impact audit and aggregate rollups on a
/// loaded dataset.
///
/// `group_column` names the demographic column ("race", "gender", or an
/// extra column); `alpha` is the significance level shared by the z-gate
/// and the Benjamini–Hochberg correction; `four_fifths` is the practical
/// impact-ratio gate; `min_reporting` is the distinct-applicant floor for
/// an eligible position. The full report (per-position rows plus
/// aggregate and occupation rollups) is returned as a JSON document
/// through `out_json`; free it with [`sa_string_free`].
///
/// # Safety
/// `dataset` must be a live handle, `group_column` a NUL-terminated
/// string, and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_audit_run(
    dataset: *const SaDataset,
    group_column: *const c_char,
    alpha: f64,
    four_fifths: f64,
    min_reporting: u64,
    out_json: *mut *mut c_char,
) -> SaStatus {
    guarded(|| {
        if dataset.is_null() {
            return fail_null("dataset");
        }
        if out_json.is_null() {
            return fail_null("out_json");
        }
        let group_column = match utf8_arg(group_column, "group_column") {
            Ok(g) => g,
            Err(status) => return status,
        };
        let params = AuditParams {
            group_column: group_column.to_string(),
            alpha,
            four_fifths,
            min_reporting,
            ..AuditParams::default()
        };
        let records = &(*dataset).records;
        let rows = match adverse::audit_positions(records, &params) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        let summary = match adverse::summarize(&rows, records, &params) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let json = match report::to_json_string(&AuditReport { rows, summary }) {
            Ok(j) => j,
            Err(e) => return fail(&e),
        };
        give_string(out_json, json)
    })
}

/// Exact Poisson-binomial PMF over `len` independent trials.
///
/// `probs` holds `len` success probabilities in [0, 1]; `out_pmf` must
/// have room for `len + 1` values and receives P(0 successes) through
/// P(`len` successes).
///
/// # Safety
/// `probs` must point to `len` readable doubles and `out_pmf` to
/// `len + 1` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sa_poisson_binomial(
    probs: *const f64,
    len: usize,
    out_pmf: *mut f64,
) -> SaStatus {
    guarded(|| {
        if probs.is_null() && len > 0 {
            return fail_null("probs");
        }
        if out_pmf.is_null() {
            return fail_null("out_pmf");
        }
        let probs = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(probs, len)
        };
        match stats::poisson_binomial(probs) {
            Ok(pmf) => {
                std::ptr::copy_nonoverlapping(pmf.as_ptr(), out_pmf, pmf.len());
                SaStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Two-sample pooled-proportion z-test of `rate_a` (on `n_a` trials)
/// against `rate_b` (on `n_b` trials).
///
/// Writes the signed statistic to `out_z` and the lower-tail p-value
/// Φ(z) to `out_p`. A degenerate pool (pooled rate 0 or 1) yields z = 0,
/// p = 0.5.
///
/// # Safety
/// `out_z` and `out_p` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sa_pooled_z_test(
    rate_a: f64,
    n_a: u64,
    rate_b: f64,
    n_b: u64,
    out_z: *mut f64,
    out_p: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_z.is_null() {
            return fail_null("out_z");
        }
        if out_p.is_null() {
            return fail_null("out_p");
        }
        match stats::pooled_z_test(rate_a, n_a, rate_b, n_b) {
            Ok(t) => {
                *out_z = t.z;
                *out_p = t.p_value;
                SaStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Benjamini–Hochberg step-up over `len` p-values at level `alpha`.
///
/// `out_rejected` must have room for `len` bytes and receives 1 where the
/// hypothesis is rejected, 0 otherwise, aligned with the input order.
/// `out_n_rejected` (nullable) receives the rejection count.
///
/// # Safety
/// `p_values` must point to `len` readable doubles and `out_rejected` to
/// `len` writable bytes; `out_n_rejected` may be null.
#[no_mangle]
pub unsafe extern "C" fn sa_benjamini_hochberg(
    p_values: *const f64,
    len: usize,
    alpha: f64,
    out_rejected: *mut u8,
    out_n_rejected: *mut usize,
) -> SaStatus {
    guarded(|| {
        if p_values.is_null() && len > 0 {
            return fail_null("p_values");
        }
        if out_rejected.is_null() && len > 0 {
            return fail_null("out_rejected");
        }
        let p_values = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(p_values, len)
        };
        match stats::benjamini_hochberg(p_values, alpha) {
            Ok(bh) => {
                for (i, &r) in bh.rejected.iter().enumerate() {
                    *out_rejected.add(i) = r as u8;
                }
                if !out_n_rejected.is_null() {
                    *out_n_rejected = bh.n_rejected;
                }
                SaStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Least-squares exponential decay fit y ≈ a·e^(b·x) over `len` points.
///
/// Points with y ≤ 0 are dropped (their logarithm is undefined); at
/// least two usable points with distinct x are required. Writes the
/// multiplier to `out_a`, the decay rate to `out_b`, and the log-space
/// coefficient of determination to `out_r_squared` (nullable).
///
/// # Safety
/// `xs` and `ys` must each point to `len` readable doubles; `out_a` and
/// `out_b` must be valid pointers; `out_r_squared` may be null.
#[no_mangle]
pub unsafe extern "C" fn sa_fit_exponential(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out_a: *mut f64,
    out_b: *mut f64,
    out_r_squared: *mut f64,
) -> SaStatus {
    guarded(|| {
        if xs.is_null() || ys.is_null() {
            return fail_null(if xs.is_null() { "xs" } else { "ys" });
        }
        if out_a.is_null() || out_b.is_null() {
            return fail_null(if out_a.is_null() { "out_a" } else { "out_b" });
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let ys = std::slice::from_raw_parts(ys, len);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        match stats::fit_exponential(&points) {
            Ok(fit) => {
                *out_a = fit.a;
                *out_b = fit.b;
                if !out_r_squared.is_null() {
                    *out_r_squared = fit.r_squared;
                }
                SaStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
