use std::ffi::{CStr, CString};
use std::ptr;

use divkit_ffi::*;

fn set(coords: &[f64], dim: usize, weights: Option<&[f64]>) -> *mut DivkitSampleSet {
    let mut out = ptr::null_mut();
    let w = weights.map_or(ptr::null(), |w| w.as_ptr());
    let st = unsafe { divkit_sample_set_new(coords.as_ptr(), coords.len() / dim, dim, w, &mut out) };
    assert_eq!(st, DivkitStatus::Ok);
    out
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { divkit_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn empty_report() -> DivkitReport {
    DivkitReport { family: DivkitFamily::Kl, order: 0.0, value: -1.0, error_estimate: -1.0 }
}

#[test]
fn delta_pair_energy_and_wasserstein() {
    let a = set(&[0.0], 1, None);
    let b = set(&[2.0], 1, None);
    let mut r = empty_report();
    assert_eq!(unsafe { divkit_energy(a, b, 1.0, &mut r) }, DivkitStatus::Ok);
    assert_eq!(r.family, DivkitFamily::Energy);
    assert_eq!(r.value, 4.0);
    assert_eq!(unsafe { divkit_wasserstein(a, b, 1.0, &mut r) }, DivkitStatus::Ok);
    assert_eq!(r.value, 2.0);
    assert_eq!(unsafe { divkit_fourier(a, b, 2.0, &mut r) }, DivkitStatus::Ok);
    let f2 = r.value * r.value;
    assert!((f2 - 4.0 * std::f64::consts::PI).abs() <= r.error_estimate);
    unsafe {
        divkit_sample_set_free(a);
        divkit_sample_set_free(b);
    }
}

#[test]
fn error_codes_and_messages() {
    let a = set(&[0.0, 1.0], 1, None);
    let b = set(&[0.0, 0.0, 1.0, 1.0], 2, None);
    let mut r = empty_report();
    assert_eq!(unsafe { divkit_energy(a, b, 1.0, &mut r) }, DivkitStatus::DimensionMismatch);
    assert!(last_error().contains("dimension"));
    assert_eq!(unsafe { divkit_energy(a, a, 4.0, &mut r) }, DivkitStatus::Inadmissible);
    assert_eq!(unsafe { divkit_energy(ptr::null(), a, 1.0, &mut r) }, DivkitStatus::NullPointer);
    assert_eq!(unsafe { divkit_energy(a, a, 1.0, ptr::null_mut()) }, DivkitStatus::NullPointer);
    assert_eq!(unsafe { divkit_energy(a, a, -0.5, &mut r) }, DivkitStatus::SingularPair);
    let neg = [1.0, -1.0];
    let mut out = ptr::null_mut();
    let st = unsafe { divkit_sample_set_new([0.0, 1.0].as_ptr(), 2, 1, neg.as_ptr(), &mut out) };
    assert_eq!(st, DivkitStatus::InvalidInput);
    assert!(out.is_null());
    let mut map = ptr::null_mut();
    assert_eq!(unsafe { divkit_whitening_fit(a, 7, 0.0, &mut map) }, DivkitStatus::InvalidInput);
    // full length is reported even when the buffer is short
    let n = unsafe { divkit_last_error_message(ptr::null_mut(), 0) };
    assert_eq!(n, last_error().len());
    unsafe {
        divkit_sample_set_free(a);
        divkit_sample_set_free(b);
        divkit_sample_set_free(ptr::null_mut());
    }
}

#[test]
fn whitening_round_trip() {
    let pts = [0.0, 0.0, 1.0, 2.0, 2.0, 1.0, 3.0, 5.0, -1.0, 0.5];
    let a = set(&pts, 2, None);
    assert_eq!(unsafe { divkit_sample_set_len(a) }, 5);
    assert_eq!(unsafe { divkit_sample_set_dim(a) }, 2);
    let mut map = ptr::null_mut();
    let st = unsafe { divkit_whitening_fit(a, DivkitWhiteningMethod::Cholesky as i32, 0.0, &mut map) };
    assert_eq!(st, DivkitStatus::Ok);
    let mut w = [0.0; 4];
    assert_eq!(unsafe { divkit_whitening_matrix(map, w.as_mut_ptr(), 2) }, DivkitStatus::BufferTooSmall);
    assert_eq!(unsafe { divkit_whitening_matrix(map, w.as_mut_ptr(), 4) }, DivkitStatus::Ok);
    assert_eq!(w[2], 0.0, "Cholesky map is upper triangular");
    let mut white = ptr::null_mut();
    assert_eq!(unsafe { divkit_whitening_apply(map, a, &mut white) }, DivkitStatus::Ok);
    let mut c = [0.0; 10];
    assert_eq!(unsafe { divkit_sample_set_coords(white, c.as_mut_ptr(), 10) }, DivkitStatus::Ok);
    let mean = |k: usize| (0..5).map(|i| c[2 * i + k]).sum::<f64>() / 5.0;
    let var = |k: usize| (0..5).map(|i| (c[2 * i + k] - mean(k)).powi(2)).sum::<f64>() / 5.0;
    assert!((var(0) - 1.0).abs() < 1e-12 && (var(1) - 1.0).abs() < 1e-12);
    let mut r = empty_report();
    let b = set(&pts.iter().map(|x| 3.0 * x).collect::<Vec<_>>(), 2, None);
    let st = unsafe { divkit_whitened_energy(a, b, 1.0, DivkitWhiteningMethod::ZcaCor as i32, &mut r) };
    assert_eq!(st, DivkitStatus::Ok);
    assert!(r.value.abs() < 1e-12);
    unsafe {
        divkit_whitening_free(map);
        divkit_sample_set_free(white);
        divkit_sample_set_free(a);
        divkit_sample_set_free(b);
    }
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    std::fs::write(&p, "x1,weight\n0,2\n1,1\n3,1\n").unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();
    let wc = CString::new("weight").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { divkit_sample_set_load_csv(path.as_ptr(), wc.as_ptr(), &mut out) }, DivkitStatus::Ok);
    assert_eq!(unsafe { divkit_sample_set_len(out) }, 3);
    unsafe { divkit_sample_set_free(out) };
    let missing = CString::new("/nonexistent/file.csv").unwrap();
    let st = unsafe { divkit_sample_set_load_csv(missing.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(st, DivkitStatus::Io);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(divkit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
