use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use wasym_ffi::*;

const SWAP: &str = include_str!("../../core/tests/corpus/test_swap.wat");

fn load(src: &str) -> *mut WasymModule {
    let src = CString::new(src).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { wasym_module_load(src.as_ptr(), &mut m) }, WasymStatus::Ok);
    assert!(!m.is_null());
    m
}

fn report_text(r: *const WasymReport) -> String {
    unsafe { CStr::from_ptr(wasym_report_text(r)) }.to_str().unwrap().to_string()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(wasym_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn sym_then_replay_through_the_abi() {
    let m = load(SWAP);
    assert!(unsafe { wasym_module_uses_symbols(m) });
    let mut opts = wasym_sym_options_default();
    opts.workers = 2;
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { wasym_sym(m, &opts, &mut r) }, WasymStatus::Ok);
    let text = report_text(r);
    assert_eq!(unsafe { wasym_report_exit_code(r) }, 13);
    assert_eq!(unsafe { wasym_report_findings(r) }, 1);
    assert!(text.starts_with("Trap: unreachable\nModel:\n"), "{text}");

    let model = CString::new(text.trim_start_matches("Trap: unreachable\n").replace("Reached problem!\n", "")).unwrap();
    let mut replay = ptr::null_mut();
    assert_eq!(unsafe { wasym_run(m, model.as_ptr(), 0, &mut replay) }, WasymStatus::Ok);
    assert_eq!(report_text(replay), "Trap: unreachable\nReached problem!\n");
    assert_eq!(unsafe { wasym_report_exit_code(replay) }, 13);
    unsafe {
        wasym_report_free(r);
        wasym_report_free(replay);
        wasym_module_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    let bad = CString::new("(module (func (export \"main\") i32.add))").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { wasym_module_load(bad.as_ptr(), &mut m) }, WasymStatus::LoadError);
    assert!(m.is_null());
    assert!(last_error().contains("stack underflow"), "{}", last_error());

    assert_eq!(unsafe { wasym_module_load(ptr::null(), &mut m) }, WasymStatus::NullArgument);

    let swap = load(SWAP);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { wasym_run(swap, ptr::null(), 0, &mut r) }, WasymStatus::ConfigError);
    assert!(r.is_null());
    let wrong = CString::new("(model\n  (symbol_0 (i64 1)))").unwrap();
    assert_eq!(unsafe { wasym_run(swap, wrong.as_ptr(), 0, &mut r) }, WasymStatus::ConfigError);
    let garbage = CString::new("(nonsense").unwrap();
    assert_eq!(unsafe { wasym_run(swap, garbage.as_ptr(), 0, &mut r) }, WasymStatus::ConfigError);
    unsafe {
        wasym_module_free(swap);
        wasym_module_free(ptr::null_mut());
        wasym_report_free(ptr::null_mut());
    }
    assert_eq!(unsafe { wasym_report_exit_code(ptr::null()) }, -1);
}

#[test]
fn concrete_run_without_symbols() {
    let m = load("(module (func (export \"main\") unreachable))");
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { wasym_run(m, ptr::null(), 0, &mut r) }, WasymStatus::Ok);
    assert_eq!(report_text(r), "Trap: unreachable\nReached problem!\n");
    unsafe {
        wasym_report_free(r);
        wasym_module_free(m);
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"wasym.h\"\nint main(void) { return wasym_sym_options_default().workers == 1 ? 0 : 1; }\n")
        .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(manifest_dir().join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// The shared library next to this test binary, if cargo built one.
fn shared_library() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libwasym_ffi.so");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (compiler(), shared_library()) else {
        eprintln!("no C compiler or shared library; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("driver.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "wasym.h"
int main(void) {
    const char *wat = "(module (func (export \"main\") (drop (i32.div_s (i32.const 1) (i32.const 0)))))";
    WasymModule *m = NULL;
    if (wasym_module_load(wat, &m) != WASYM_STATUS_OK) return 2;
    WasymReport *r = NULL;
    WasymSymOptions o = wasym_sym_options_default();
    o.brute_force = true;
    if (wasym_sym(m, &o, &r) != WASYM_STATUS_OK) return 3;
    fputs(wasym_report_text(r), stdout);
    int code = wasym_report_exit_code(r);
    wasym_report_free(r);
    wasym_module_free(m);
    if (wasym_module_load("(module", &m) != WASYM_STATUS_LOAD_ERROR) return 4;
    if (strlen(wasym_last_error()) == 0) return 5;
    return code;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("driver");
    let lib_dir = lib.parent().unwrap();
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg(format!("-L{}", lib_dir.display()))
        .arg("-lwasym_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(13));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "Trap: integer divide by zero\nModel:\n  (model)\nReached problem!\n");
    assert!(Path::new(&exe).exists());
}
