//! C ABI over the scenario runner and the closed-form diagnostics.
//!
//! Every fallible call returns a [`TwStatus`]; on failure the message is
//! available from [`tw_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use trapwave::harness::{run_scenario, write_outputs, ScenarioConfig, ScenarioOutcome};
use trapwave::Error;

/// Result codes of the fallible calls.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    /// A null pointer, invalid UTF-8 or an out-of-range argument.
    InvalidArgument = 1,
    /// The scenario text does not parse or does not validate.
    Config = 2,
    /// The solver or a diagnostic failed.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// A parsed and validated scenario.
pub struct TwScenario {
    config: ScenarioConfig,
}

/// The result of running a scenario.
pub struct TwOutcome {
    outcome: ScenarioOutcome,
    names: Vec<CString>,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> TwStatus {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => TwStatus::Config,
        Error::Io(_) | Error::Json(_) => TwStatus::Io,
        _ => TwStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TwStatus, String)>) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside trapwave");
            TwStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (TwStatus, String) {
    (status_of(&e), e.to_string())
}

fn arg_err(msg: &str) -> (TwStatus, String) {
    (TwStatus::InvalidArgument, msg.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TwStatus, String)> {
    if p.is_null() {
        return Err(arg_err(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg_err(&format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `1/(1+x²)`.
#[no_mangle]
pub extern "C" fn tw_potential_v(x: f64) -> f64 {
    trapwave::potential_v(x)
}

/// `1` if `2 - 2α = 3α` to within `1e-12`, else `0`.
#[no_mangle]
pub extern "C" fn tw_alpha_balance(alpha: f64) -> c_int {
    c_int::from(trapwave::alpha_balance(alpha))
}

/// Minimum of `(1-3s²)/(1+s²)³ + M s²` over `n` uniform samples of
/// `[0, s_max]`.
///
/// # Safety
/// `out_min` and `out_argmin` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_lemma_min_scan(
    m_const: f64,
    s_max: f64,
    n_samples: usize,
    out_min: *mut f64,
    out_argmin: *mut f64,
) -> TwStatus {
    guard(|| {
        if out_min.is_null() || out_argmin.is_null() {
            return Err(arg_err("output pointer is null"));
        }
        let s = trapwave::lemma_min_scan(m_const, s_max, n_samples).map_err(lib_err)?;
        *out_min = s.min;
        *out_argmin = s.argmin;
        Ok(())
    })
}

/// Parse and validate a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_scenario_from_toml(toml: *const c_char, out: *mut *mut TwScenario) -> TwStatus {
    guard(|| {
        if out.is_null() {
            return Err(arg_err("output pointer is null"));
        }
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let config = ScenarioConfig::from_toml_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TwScenario { config }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`tw_scenario_from_toml`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tw_scenario_free(scenario: *mut TwScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run a scenario in memory. No files are written.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_scenario_run(scenario: *const TwScenario, out: *mut *mut TwOutcome) -> TwStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return Err(arg_err("null handle or output pointer"));
        }
        *out = ptr::null_mut();
        let outcome = run_scenario(&(*scenario).config).map_err(lib_err)?;
        let names = outcome
            .summary
            .checks
            .iter()
            .map(|c| CString::new(c.name.as_str()).unwrap_or_default())
            .collect();
        let json = outcome.summary.to_json().map_err(lib_err)?;
        let json = CString::new(json).map_err(|_| arg_err("summary contains NUL"))?;
        *out = Box::into_raw(Box::new(TwOutcome { outcome, names, json }));
        Ok(())
    })
}

/// # Safety
/// `outcome` must be null or a live handle from [`tw_scenario_run`].
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_free(outcome: *mut TwOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// `1` if every check passed, `0` if not, `-1` for a null handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_all_pass(outcome: *const TwOutcome) -> c_int {
    match outcome.as_ref() {
        Some(o) => c_int::from(o.outcome.summary.all_pass),
        None => -1,
    }
}

/// Number of checks in the summary; `0` for a null handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_check_count(outcome: *const TwOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.names.len())
}

/// Name of check `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_check_name(outcome: *const TwOutcome, index: usize) -> *const c_char {
    match outcome.as_ref().and_then(|o| o.names.get(index)) {
        Some(n) => n.as_ptr(),
        None => ptr::null(),
    }
}

/// Verdict (`0`/`1`), margin and value of check `index`.
///
/// # Safety
/// `outcome` must be a live handle; the output pointers must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_check(
    outcome: *const TwOutcome,
    index: usize,
    out_verdict: *mut c_int,
    out_margin: *mut f64,
    out_value: *mut f64,
) -> TwStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| arg_err("null handle"))?;
        if out_verdict.is_null() || out_margin.is_null() || out_value.is_null() {
            return Err(arg_err("output pointer is null"));
        }
        let c = o
            .outcome
            .summary
            .checks
            .get(index)
            .ok_or_else(|| arg_err("check index out of range"))?;
        *out_verdict = c_int::from(c.verdict);
        *out_margin = c.margin;
        *out_value = c.value;
        Ok(())
    })
}

/// Empirical constant `name` of the run.
///
/// # Safety
/// `outcome` must be a live handle, `name` a NUL-terminated string and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_constant(
    outcome: *const TwOutcome,
    name: *const c_char,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| arg_err("null handle"))?;
        let name = read_str(name, "name")?;
        if out.is_null() {
            return Err(arg_err("output pointer is null"));
        }
        let v = o
            .outcome
            .summary
            .constants
            .get(name)
            .ok_or_else(|| arg_err(&format!("no constant named `{name}`")))?;
        *out = *v;
        Ok(())
    })
}

/// The summary as pretty-printed JSON, owned by the handle.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_summary_json(outcome: *const TwOutcome) -> *const c_char {
    outcome.as_ref().map_or(ptr::null(), |o| o.json.as_ptr())
}

/// Write the CSV and JSON artifacts into directory `dir`.
///
/// # Safety
/// `outcome` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tw_outcome_write(outcome: *const TwOutcome, dir: *const c_char) -> TwStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| arg_err("null handle"))?;
        let dir = read_str(dir, "dir")?;
        write_outputs(&o.outcome, Path::new(dir)).map_err(lib_err)
    })
}
