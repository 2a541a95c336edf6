//! C ABI for the analytics engine: load score tables, compute the full
//! report, and query CUR / IG / degradation / redundancy values.
//!
//! Conventions:
//! * objects are opaque handles created by `rl_*_load`/`rl_*_compute` and
//!   released by the matching `rl_*_free`; handles are not thread-safe to
//!   mutate but may be read from multiple threads;
//! * every fallible call returns an [`RlStatus`]; on failure a thread-local
//!   message is available via [`rl_last_error`] until the next call on that
//!   thread;
//! * strings are NUL-terminated UTF-8.
//!
//! The header `include/redundancy_lab.h` is generated at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use redundancy_lab::ablate::{full_report, FullReport, ReportOptions};
use redundancy_lab::core::{Category, ScoreTable};
use redundancy_lab::error::Error;
use redundancy_lab::ingest::{self, CategoryScheme};
use redundancy_lab::metrics::{Column, CurRule};

/// Status codes. The first four mirror the CLI exit-code classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    RlOk = 0,
    RlUsage = 1,
    RlData = 2,
    RlNumeric = 3,
    RlNullArgument = 4,
    RlInvalidUtf8 = 5,
    RlNotFound = 6,
    RlBufferTooSmall = 7,
    RlPanic = 8,
}

/// CUR aggregation rule below the full subset size.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlCurRule {
    RlCurPerSubsetMean = 0,
    RlCurMeanOfScores = 1,
}

/// Max/min/mean scores at one masking level.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlDegradationRow {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// Valid only when `has_rel_change` is nonzero.
    pub rel_change: f64,
    pub has_rel_change: i32,
    pub subset_count: usize,
}

/// Outcome of the redundancy predicate on overall scores.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlRedundancy {
    pub raised: i32,
    pub epsilon: f64,
    pub baseline: f64,
    pub best_proper: f64,
    /// (baseline - best_proper) / baseline.
    pub relative_drop: f64,
    /// Active-encoder bitmask of the best proper subset.
    pub witness_bits: u32,
}

/// Opaque score table handle.
pub struct RlTable {
    inner: ScoreTable,
}

/// Opaque category scheme handle.
pub struct RlScheme {
    inner: CategoryScheme,
}

/// Opaque report handle.
pub struct RlReport {
    inner: FullReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> RlStatus {
    match err.exit_code() {
        1 => RlStatus::RlUsage,
        3 => RlStatus::RlNumeric,
        _ => RlStatus::RlData,
    }
}

fn guard(f: impl FnOnce() -> RlStatus) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RlStatus::RlPanic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, RlStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(RlStatus::RlNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        RlStatus::RlInvalidUtf8
    })
}

fn out_arg<'a, T>(ptr: *mut T) -> Result<&'a mut T, RlStatus> {
    if ptr.is_null() {
        set_error("null output argument");
        return Err(RlStatus::RlNullArgument);
    }
    Ok(unsafe { &mut *ptr })
}

fn handle_arg<'a, T>(ptr: *const T) -> Result<&'a T, RlStatus> {
    if ptr.is_null() {
        set_error("null handle argument");
        return Err(RlStatus::RlNullArgument);
    }
    Ok(unsafe { &*ptr })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the most recent failure on this thread. Valid until the next
/// library call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a score table from a v1 file (encoder order and granularity come
/// from the file's metadata comments).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_table_load(path: *const c_char, out: *mut *mut RlTable) -> RlStatus {
    guard(|| {
        let (path, out) = match (utf8_arg(path), out_arg(out)) {
            (Ok(p), Ok(o)) => (p, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match ingest::load_score_table_auto(Path::new(path)) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(RlTable { inner: table }));
                RlStatus::RlOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Load one of the bundled reference tables: "eagle" or "cambrian".
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_table_builtin(name: *const c_char, out: *mut *mut RlTable) -> RlStatus {
    guard(|| {
        let (name, out) = match (utf8_arg(name), out_arg(out)) {
            (Ok(p), Ok(o)) => (p, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match ingest::fixtures::by_name(name) {
            Some(table) => {
                *out = Box::into_raw(Box::new(RlTable { inner: table }));
                RlStatus::RlOk
            }
            None => {
                set_error(&format!("no bundled table named '{name}'"));
                RlStatus::RlNotFound
            }
        }
    })
}

/// # Safety
/// `table` must be NULL or a pointer returned by `rl_table_load`/`rl_table_builtin`.
#[no_mangle]
pub unsafe extern "C" fn rl_table_free(table: *mut RlTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of encoders in the table; 0 for a null handle.
///
/// # Safety
/// `table` must be NULL or a valid table handle.
#[no_mangle]
pub unsafe extern "C" fn rl_table_encoder_count(table: *const RlTable) -> usize {
    match handle_arg(table) {
        Ok(t) => t.inner.encoder_count(),
        Err(_) => 0,
    }
}

/// Copy the NUL-terminated name of encoder `index` into `buf`.
///
/// # Safety
/// `table` must be a valid handle; `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_table_encoder_name(
    table: *const RlTable,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> RlStatus {
    guard(|| {
        let table = match handle_arg(table) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if buf.is_null() {
            set_error("null buffer");
            return RlStatus::RlNullArgument;
        }
        let Some(encoder) = table.inner.encoders.get(index) else {
            set_error(&format!("encoder index {index} out of range"));
            return RlStatus::RlNotFound;
        };
        let bytes = encoder.name.as_bytes();
        if len < bytes.len() + 1 {
            set_error(&format!("buffer of {len} bytes too small for name"));
            return RlStatus::RlBufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), bytes.len());
        *buf.add(bytes.len()) = 0;
        RlStatus::RlOk
    })
}

/// Load a category scheme from a v1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_scheme_load(path: *const c_char, out: *mut *mut RlScheme) -> RlStatus {
    guard(|| {
        let (path, out) = match (utf8_arg(path), out_arg(out)) {
            (Ok(p), Ok(o)) => (p, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match ingest::load_category_scheme(Path::new(path)) {
            Ok(scheme) => {
                *out = Box::into_raw(Box::new(RlScheme { inner: scheme }));
                RlStatus::RlOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// The built-in benchmark -> category scheme.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_scheme_default(out: *mut *mut RlScheme) -> RlStatus {
    guard(|| {
        let out = match out_arg(out) {
            Ok(o) => o,
            Err(s) => return s,
        };
        *out = Box::into_raw(Box::new(RlScheme {
            inner: ingest::default_scheme(),
        }));
        RlStatus::RlOk
    })
}

/// # Safety
/// `scheme` must be NULL or a pointer returned by a scheme constructor.
#[no_mangle]
pub unsafe extern "C" fn rl_scheme_free(scheme: *mut RlScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Compute the full report. `epsilon` feeds the redundancy predicate (score
/// units; 0 demands a proper subset that matches or beats the full set).
///
/// # Safety
/// `table` and `scheme` must be valid handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_report_compute(
    table: *const RlTable,
    scheme: *const RlScheme,
    rule: RlCurRule,
    epsilon: f64,
    out: *mut *mut RlReport,
) -> RlStatus {
    guard(|| {
        let (table, scheme, out) = match (handle_arg(table), handle_arg(scheme), out_arg(out)) {
            (Ok(t), Ok(s), Ok(o)) => (t, s, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let options = ReportOptions {
            rule: match rule {
                RlCurRule::RlCurPerSubsetMean => CurRule::PerSubsetMean,
                RlCurRule::RlCurMeanOfScores => CurRule::MeanOfScores,
            },
            epsilon,
        };
        match full_report(&table.inner, &scheme.inner, &options) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(RlReport { inner: report }));
                RlStatus::RlOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

fn parse_category(name: &str) -> Result<Category, RlStatus> {
    name.parse::<Category>().map_err(|e| {
        set_error(&e.to_string());
        RlStatus::RlData
    })
}

/// CUR (as a fraction) of `encoder` at subset size `size` in `category`.
///
/// # Safety
/// `report` must be a valid handle; `category` a NUL-terminated string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_report_cur(
    report: *const RlReport,
    category: *const c_char,
    size: usize,
    encoder: usize,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let (report, category, out) = match (handle_arg(report), utf8_arg(category), out_arg(out))
        {
            (Ok(r), Ok(c), Ok(o)) => (r, c, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let category = match parse_category(category) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let Some(row) = report.inner.cur.row(category, size) else {
            set_error(&format!("no CUR row for {category} at size {size}"));
            return RlStatus::RlNotFound;
        };
        match row.curs.get(encoder) {
            Some(Some(v)) => {
                *out = *v;
                RlStatus::RlOk
            }
            Some(None) => {
                set_error("insufficient coverage for this cell");
                RlStatus::RlData
            }
            None => {
                set_error(&format!("encoder index {encoder} out of range"));
                RlStatus::RlNotFound
            }
        }
    })
}

/// Information gap (max - min CUR, as a fraction) at (category, size).
///
/// # Safety
/// `report` must be a valid handle; `category` a NUL-terminated string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_report_ig(
    report: *const RlReport,
    category: *const c_char,
    size: usize,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let (report, category, out) = match (handle_arg(report), utf8_arg(category), out_arg(out))
        {
            (Ok(r), Ok(c), Ok(o)) => (r, c, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let category = match parse_category(category) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match report.inner.cur.row(category, size).and_then(|r| r.ig) {
            Some(ig) => {
                *out = ig;
                RlStatus::RlOk
            }
            None => {
                set_error(&format!("no IG for {category} at size {size}"));
                RlStatus::RlNotFound
            }
        }
    })
}

/// Degradation row for a category name (or "Overall") at `masked` masked
/// encoders.
///
/// # Safety
/// `report` must be a valid handle; `category` a NUL-terminated string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_report_degradation(
    report: *const RlReport,
    category: *const c_char,
    masked: usize,
    out: *mut RlDegradationRow,
) -> RlStatus {
    guard(|| {
        let (report, category, out) = match (handle_arg(report), utf8_arg(category), out_arg(out))
        {
            (Ok(r), Ok(c), Ok(o)) => (r, c, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let column = if category == "Overall" {
            Column::Overall
        } else {
            match parse_category(category) {
                Ok(c) => Column::Category(c),
                Err(s) => return s,
            }
        };
        let Some(row) = report.inner.degradation.get(column, masked) else {
            set_error(&format!("no degradation row for {column} at {masked} masked"));
            return RlStatus::RlNotFound;
        };
        *out = RlDegradationRow {
            max: row.max,
            min: row.min,
            mean: row.mean,
            rel_change: row.rel_change.unwrap_or(0.0),
            has_rel_change: i32::from(row.rel_change.is_some()),
            subset_count: row.subset_count,
        };
        RlStatus::RlOk
    })
}

/// Outcome of the redundancy predicate.
///
/// # Safety
/// `report` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_report_redundancy(
    report: *const RlReport,
    out: *mut RlRedundancy,
) -> RlStatus {
    guard(|| {
        let (report, out) = match (handle_arg(report), out_arg(out)) {
            (Ok(r), Ok(o)) => (r, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let Some(finding) = &report.inner.redundancy else {
            set_error("redundancy predicate unavailable (insufficient coverage)");
            return RlStatus::RlNotFound;
        };
        *out = RlRedundancy {
            raised: i32::from(finding.raised),
            epsilon: finding.epsilon,
            baseline: finding.baseline,
            best_proper: finding.best_proper,
            relative_drop: finding.relative_drop,
            witness_bits: finding.witness.bits(),
        };
        RlStatus::RlOk
    })
}

/// # Safety
/// `report` must be NULL or a pointer returned by `rl_report_compute`.
#[no_mangle]
pub unsafe extern "C" fn rl_report_free(report: *mut RlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
