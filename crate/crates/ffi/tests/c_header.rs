//! Compiles and runs a small C program against the generated header and
//! the shared library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "divkit.h"

int main(void) {
    double a[] = {0.0}, b[] = {2.0};
    DivkitSampleSet *mu = NULL, *nu = NULL;
    DivkitReport r;
    if (divkit_sample_set_new(a, 1, 1, NULL, &mu) != DIVKIT_STATUS_OK) return 2;
    if (divkit_sample_set_new(b, 1, 1, NULL, &nu) != DIVKIT_STATUS_OK) return 3;
    if (divkit_energy(mu, nu, 1.0, &r) != DIVKIT_STATUS_OK) return 4;
    if (r.family != DIVKIT_FAMILY_ENERGY || r.value != 4.0) return 5;
    if (divkit_energy(mu, nu, 2.0, &r) != DIVKIT_STATUS_INADMISSIBLE) return 6;
    char msg[128];
    if (divkit_last_error_message(msg, sizeof msg) == 0) return 7;
    divkit_sample_set_free(mu);
    divkit_sample_set_free(nu);
    printf("%s\n", divkit_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib_dir = target_dir();
    if !lib_dir.join("libdivkit_ffi.so").exists() && !lib_dir.join("libdivkit_ffi.dylib").exists() {
        eprintln!("shared library not found in {}; skipping", lib_dir.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-ldivkit_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
