//! C ABI for the wasym engine.
//!
//! Every function returns a [`WasymStatus`]. Objects are opaque handles
//! allocated by this library and released with the matching `_free`
//! function. When a call fails, [`wasym_last_error`] returns a description
//! that stays valid until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use wasym::interp::{Limits, Program, SymConfig, DEFAULT_FUEL, DEFAULT_YIELD_EVERY};
use wasym::report::{self, ReportOptions};
use wasym::solver::{Model, SolverConfig, DEFAULT_SOLVER_COMMAND};

/// Result codes. `WASYM_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WasymStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The module failed to parse, validate or link.
    LoadError = 3,
    /// A bad option, model text or replay model.
    ConfigError = 4,
    /// The exploration failed internally.
    EngineError = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A loaded, linked module. Opaque.
pub struct WasymModule {
    program: Arc<Program>,
}

/// The outcome of a run. Opaque.
pub struct WasymReport {
    text: CString,
    exit_code: i32,
    findings: usize,
}

/// Options for [`wasym_sym`]. Zero fields take their defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WasymSymOptions {
    /// Worker threads; 0 means 1.
    pub workers: u32,
    /// Instruction budget per path; 0 means the default.
    pub fuel: u64,
    /// Wall-clock limit in milliseconds; 0 means none.
    pub timeout_ms: u64,
    pub fail_fast: bool,
    pub assertion_only: bool,
    /// Disable periodic yields.
    pub deterministic: bool,
    /// Use the built-in enumeration backend instead of an external solver.
    pub brute_force: bool,
    /// Solver command line, or NULL for the default.
    pub solver_command: *const c_char,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: WasymStatus, msg: impl Into<String>) -> WasymStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> WasymStatus) -> WasymStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(WasymStatus::Panic, "panic inside wasym"))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, WasymStatus> {
    if p.is_null() {
        return Err(fail(WasymStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(WasymStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn make_report(text: String, exit_code: i32, findings: usize) -> *mut WasymReport {
    let text = CString::new(text).unwrap_or_default();
    Box::into_raw(Box::new(WasymReport { text, exit_code, findings }))
}

/// Description of the last failure on this thread, or an empty string.
#[no_mangle]
pub extern "C" fn wasym_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse, validate and link WebAssembly text.
///
/// # Safety
/// `wat` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wasym_module_load(wat: *const c_char, out: *mut *mut WasymModule) -> WasymStatus {
    guard(|| {
        if out.is_null() {
            return fail(WasymStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let src = match text(wat) {
            Ok(s) => s,
            Err(st) => return st,
        };
        let inst = match wasym::wat::load(src) {
            Ok(i) => i,
            Err(e) => return fail(WasymStatus::LoadError, e.to_string()),
        };
        match Program::new(inst) {
            Some(program) => {
                *out = Box::into_raw(Box::new(WasymModule { program }));
                WasymStatus::Ok
            }
            None => fail(WasymStatus::LoadError, "no entry point"),
        }
    })
}

/// Release a module. NULL is ignored.
///
/// # Safety
/// `module` must come from [`wasym_module_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wasym_module_free(module: *mut WasymModule) {
    if !module.is_null() {
        drop(Box::from_raw(module));
    }
}

/// Whether the module imports symbol intrinsics.
///
/// # Safety
/// `module` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn wasym_module_uses_symbols(module: *const WasymModule) -> bool {
    module.as_ref().is_some_and(|m| m.program.instance.uses_symbols())
}

/// Run `main` concretely. `model` is the text of a replay model, or NULL.
/// `fuel` 0 takes the default budget.
///
/// # Safety
/// `module` must be a live handle, `model` NULL or a NUL-terminated string,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wasym_run(
    module: *const WasymModule,
    model: *const c_char,
    fuel: u64,
    out: *mut *mut WasymReport,
) -> WasymStatus {
    guard(|| {
        let (Some(m), false) = (module.as_ref(), out.is_null()) else {
            return fail(WasymStatus::NullArgument, "null module or output pointer");
        };
        *out = ptr::null_mut();
        let model = if model.is_null() {
            None
        } else {
            let parsed = text(model).and_then(|t| {
                Model::parse(t).map_err(|e| fail(WasymStatus::ConfigError, e.to_string()))
            });
            match parsed {
                Ok(model) => Some(model),
                Err(st) => return st,
            }
        };
        let fuel = if fuel == 0 { DEFAULT_FUEL } else { fuel };
        match report::run_report(&m.program, fuel, model.as_ref()) {
            Ok((text, code)) => {
                let findings = (code == report::EXIT_PROBLEM) as usize;
                *out = make_report(text, code, findings);
                WasymStatus::Ok
            }
            Err(e) => fail(WasymStatus::ConfigError, e.to_string()),
        }
    })
}

/// Default option values.
#[no_mangle]
pub extern "C" fn wasym_sym_options_default() -> WasymSymOptions {
    WasymSymOptions {
        workers: 1,
        fuel: DEFAULT_FUEL,
        timeout_ms: 0,
        fail_fast: false,
        assertion_only: false,
        deterministic: false,
        brute_force: false,
        solver_command: ptr::null(),
    }
}

/// Explore every path of `main`.
///
/// # Safety
/// `module` must be a live handle, `options` NULL or valid, and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wasym_sym(
    module: *const WasymModule,
    options: *const WasymSymOptions,
    out: *mut *mut WasymReport,
) -> WasymStatus {
    guard(|| {
        let (Some(m), false) = (module.as_ref(), out.is_null()) else {
            return fail(WasymStatus::NullArgument, "null module or output pointer");
        };
        *out = ptr::null_mut();
        let opts = options.as_ref().copied().unwrap_or_else(|| wasym_sym_options_default());
        let solver = if opts.brute_force {
            SolverConfig::brute_force()
        } else {
            let cmd = if opts.solver_command.is_null() {
                DEFAULT_SOLVER_COMMAND
            } else {
                match text(opts.solver_command) {
                    Ok(c) => c,
                    Err(st) => return st,
                }
            };
            SolverConfig::auto(cmd).0
        };
        let cfg = SymConfig {
            workers: if opts.deterministic { 1 } else { opts.workers.max(1) as usize },
            limits: Limits {
                fuel: if opts.fuel == 0 { DEFAULT_FUEL } else { opts.fuel },
                yield_every: (!opts.deterministic).then_some(DEFAULT_YIELD_EVERY),
            },
            solver,
            timeout: (opts.timeout_ms > 0).then(|| Duration::from_millis(opts.timeout_ms)),
        };
        let ropts = ReportOptions { fail_fast: opts.fail_fast, assertion_only: opts.assertion_only };
        match report::sym_report(&m.program, &cfg, ropts, |_| {}) {
            Ok(rep) => {
                *out = make_report(rep.render(), rep.exit_code(), rep.findings.len());
                WasymStatus::Ok
            }
            Err(e) => fail(WasymStatus::EngineError, e.to_string()),
        }
    })
}

/// The report stream text. Valid until the report is freed.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn wasym_report_text(report: *const WasymReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.text.as_ptr())
}

/// The exit code the command line tool would return: 0 or 13.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn wasym_report_exit_code(report: *const WasymReport) -> i32 {
    report.as_ref().map_or(-1, |r| r.exit_code)
}

/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn wasym_report_findings(report: *const WasymReport) -> usize {
    report.as_ref().map_or(0, |r| r.findings)
}

/// Release a report. NULL is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wasym_report_free(report: *mut WasymReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
