//! C ABI for divkit.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_fit`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`DivkitStatus`]; on failure the message is available through
//! [`divkit_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use divkit::energy::{energy_sq, EnergyOrder, DEFAULT_MOMENT_TOL};
use divkit::fourier::{fourier_metric, FourierOrder, QuadratureSpec};
use divkit::transport::{wasserstein_1d, wasserstein_lp, DEFAULT_MAX_SUPPORT};
use divkit::whitening::{fit_whitening, whitened_divergence, DivergenceSelector, WhiteningMap, WhiteningMethod};
use divkit::{DivError, DivergenceReport, Family, WeightedSampleSet};

/// Result codes. `DIVKIT_STATUS_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    SingularPair = 4,
    MomentMismatch = 5,
    DegenerateCovariance = 6,
    Inadmissible = 7,
    NotNormalized = 8,
    SupportViolation = 9,
    TooLarge = 10,
    DegenerateBasis = 11,
    Numerical = 12,
    Io = 13,
    Csv = 14,
    Json = 15,
    BufferTooSmall = 16,
    Panic = 99,
}

/// Divergence family tag of a [`DivkitReport`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivkitFamily {
    Energy = 0,
    Fourier = 1,
    Wasserstein = 2,
    Kl = 3,
    Fisher = 4,
    Cramer = 5,
    GiniFamily = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivkitWhiteningMethod {
    Cholesky = 0,
    ZcaCor = 1,
}

/// Plain-data view of a divergence report (diagnostics are not exported).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivkitReport {
    pub family: DivkitFamily,
    pub order: f64,
    pub value: f64,
    pub error_estimate: f64,
}

/// Opaque weighted sample set.
pub struct DivkitSampleSet(WeightedSampleSet);

/// Opaque whitening map.
pub struct DivkitWhiteningMap(WhiteningMap);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &DivError) -> DivkitStatus {
    match e {
        DivError::Csv { .. } => DivkitStatus::Csv,
        DivError::Io(_) => DivkitStatus::Io,
        DivError::Json(_) => DivkitStatus::Json,
        DivError::InvalidInput(_) => DivkitStatus::InvalidInput,
        DivError::DimensionMismatch { .. } => DivkitStatus::DimensionMismatch,
        DivError::SingularPair { .. } => DivkitStatus::SingularPair,
        DivError::MomentMismatch { .. } => DivkitStatus::MomentMismatch,
        DivError::DegenerateCovariance(_) => DivkitStatus::DegenerateCovariance,
        DivError::Inadmissible(_) => DivkitStatus::Inadmissible,
        DivError::NotNormalized { .. } => DivkitStatus::NotNormalized,
        DivError::SupportViolation(_) => DivkitStatus::SupportViolation,
        DivError::TooLarge(_) => DivkitStatus::TooLarge,
        DivError::DegenerateBasis(_) => DivkitStatus::DegenerateBasis,
        DivError::Numerical(_) => DivkitStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Div(DivError),
    Small,
}

impl From<DivError> for Failure {
    fn from(e: DivError) -> Self {
        Failure::Div(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DivkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DivkitStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DivkitStatus::NullPointer
        }
        Ok(Err(Failure::Div(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Small)) => {
            set_error("output buffer too small".into());
            DivkitStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            DivkitStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn family(f: Family) -> DivkitFamily {
    match f {
        Family::Energy => DivkitFamily::Energy,
        Family::Fourier => DivkitFamily::Fourier,
        Family::Wasserstein => DivkitFamily::Wasserstein,
        Family::KL => DivkitFamily::Kl,
        Family::Fisher => DivkitFamily::Fisher,
        Family::Cramer => DivkitFamily::Cramer,
        Family::GiniFamily => DivkitFamily::GiniFamily,
    }
}

unsafe fn write_report(out: *mut DivkitReport, r: &DivergenceReport) -> Result<(), Failure> {
    let out = out.as_mut().ok_or(Failure::Null("out"))?;
    *out = DivkitReport { family: family(r.family), order: r.order, value: r.value, error_estimate: r.error_estimate };
    Ok(())
}

// Taken as an integer so an out-of-range value from C is an error, not UB.
fn method(m: i32) -> Result<WhiteningMethod, Failure> {
    match m {
        x if x == DivkitWhiteningMethod::Cholesky as i32 => Ok(WhiteningMethod::Cholesky),
        x if x == DivkitWhiteningMethod::ZcaCor as i32 => Ok(WhiteningMethod::ZcaCor),
        other => Err(Failure::Div(DivError::InvalidInput(format!("unknown whitening method {other}")))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn divkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn divkit_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a sample set from `n_points × dim` row-major coordinates and
/// optional weights (null for uniform).
///
/// # Safety
/// `coords` must hold `n_points * dim` values; `weights` must be null or
/// hold `n_points` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_new(
    coords: *const f64,
    n_points: usize,
    dim: usize,
    weights: *const f64,
    out: *mut *mut DivkitSampleSet,
) -> DivkitStatus {
    guard(|| {
        if coords.is_null() {
            return Err(Failure::Null("coords"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let total = n_points
            .checked_mul(dim)
            .ok_or_else(|| DivError::InvalidInput("size overflow".into()))?;
        let c = std::slice::from_raw_parts(coords, total).to_vec();
        let w = (!weights.is_null()).then(|| std::slice::from_raw_parts(weights, n_points).to_vec());
        let set = WeightedSampleSet::from_flat(dim, c, w)?;
        *out = Box::into_raw(Box::new(DivkitSampleSet(set)));
        Ok(())
    })
}

/// Loads a CSV sample file (header line; optional weight column name).
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `weight_column` null or
/// NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_load_csv(
    path: *const c_char,
    weight_column: *const c_char,
    out: *mut *mut DivkitSampleSet,
) -> DivkitStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let utf8 = |p: *const c_char| -> Result<String, Failure> {
            CStr::from_ptr(p)
                .to_str()
                .map(str::to_owned)
                .map_err(|_| Failure::Div(DivError::InvalidInput("path is not UTF-8".into())))
        };
        let p = utf8(path)?;
        let w = if weight_column.is_null() { None } else { Some(utf8(weight_column)?) };
        let set = WeightedSampleSet::load_csv(p, w.as_deref())?;
        *out = Box::into_raw(Box::new(DivkitSampleSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_free(set: *mut DivkitSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of points, 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_len(set: *const DivkitSampleSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Dimension, 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_dim(set: *const DivkitSampleSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the coordinates (row-major) into `buf` of `len` doubles.
///
/// # Safety
/// `set` a live handle, `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_sample_set_coords(set: *const DivkitSampleSet, buf: *mut f64, len: usize) -> DivkitStatus {
    guard(|| {
        let s = deref(set, "set")?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let c = s.0.coords();
        if len < c.len() {
            return Err(Failure::Small);
        }
        ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        Ok(())
    })
}

/// Euclidean Energy distance energy_sq of order `alpha`.
///
/// # Safety
/// Handles live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_energy(
    mu: *const DivkitSampleSet,
    nu: *const DivkitSampleSet,
    alpha: f64,
    out: *mut DivkitReport,
) -> DivkitStatus {
    guard(|| {
        let (a, b) = (deref(mu, "mu")?, deref(nu, "nu")?);
        let r = energy_sq(&a.0, &b.0, EnergyOrder::euclidean(alpha)?, DEFAULT_MOMENT_TOL)?;
        write_report(out, &r)
    })
}

/// Fourier-based metric F_s with default quadrature.
///
/// # Safety
/// Handles live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_fourier(
    mu: *const DivkitSampleSet,
    nu: *const DivkitSampleSet,
    s: f64,
    out: *mut DivkitReport,
) -> DivkitStatus {
    guard(|| {
        let (a, b) = (deref(mu, "mu")?, deref(nu, "nu")?);
        let order = FourierOrder::new(s, a.0.dim())?;
        let r = fourier_metric(&a.0, &b.0, &order, &QuadratureSpec::default(), DEFAULT_MOMENT_TOL)?;
        write_report(out, &r)
    })
}

/// Wasserstein W_p (quantile coupling in 1-D, transportation simplex otherwise).
///
/// # Safety
/// Handles live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_wasserstein(
    mu: *const DivkitSampleSet,
    nu: *const DivkitSampleSet,
    p: f64,
    out: *mut DivkitReport,
) -> DivkitStatus {
    guard(|| {
        let (a, b) = (deref(mu, "mu")?, deref(nu, "nu")?);
        let r = if a.0.dim() == 1 {
            wasserstein_1d(&a.0, &b.0, p)?
        } else {
            wasserstein_lp(&a.0, &b.0, p, DEFAULT_MAX_SUPPORT)?.0
        };
        write_report(out, &r)
    })
}

/// Energy distance between the separately whitened samples; `whitening`
/// is a `DivkitWhiteningMethod` value.
///
/// # Safety
/// Handles live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_whitened_energy(
    mu: *const DivkitSampleSet,
    nu: *const DivkitSampleSet,
    alpha: f64,
    whitening: i32,
    out: *mut DivkitReport,
) -> DivkitStatus {
    guard(|| {
        let (a, b) = (deref(mu, "mu")?, deref(nu, "nu")?);
        let sel = DivergenceSelector::Energy { order: EnergyOrder::euclidean(alpha)?, moment_tol: DEFAULT_MOMENT_TOL };
        let r = whitened_divergence(&sel, &a.0, &b.0, method(whitening)?)?;
        write_report(out, &r)
    })
}

/// Fits a whitening map on `mu` (ridge 0 for none); `whitening` is a
/// `DivkitWhiteningMethod` value.
///
/// # Safety
/// `mu` live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_whitening_fit(
    mu: *const DivkitSampleSet,
    whitening: i32,
    ridge: f64,
    out: *mut *mut DivkitWhiteningMap,
) -> DivkitStatus {
    guard(|| {
        let a = deref(mu, "mu")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let map = fit_whitening(&a.0, method(whitening)?, ridge)?;
        *out = Box::into_raw(Box::new(DivkitWhiteningMap(map)));
        Ok(())
    })
}

/// Copies the row-major whitening matrix into `buf` of `len` doubles.
///
/// # Safety
/// `map` live, `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_whitening_matrix(map: *const DivkitWhiteningMap, buf: *mut f64, len: usize) -> DivkitStatus {
    guard(|| {
        let m = deref(map, "map")?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let e = &m.0.entries;
        if len < e.len() {
            return Err(Failure::Small);
        }
        ptr::copy_nonoverlapping(e.as_ptr(), buf, e.len());
        Ok(())
    })
}

/// Applies the map to every point of `mu`, producing a new handle.
///
/// # Safety
/// Handles live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn divkit_whitening_apply(
    map: *const DivkitWhiteningMap,
    mu: *const DivkitSampleSet,
    out: *mut *mut DivkitSampleSet,
) -> DivkitStatus {
    guard(|| {
        let (m, a) = (deref(map, "map")?, deref(mu, "mu")?);
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let white = m.0.apply(&a.0)?;
        *out = Box::into_raw(Box::new(DivkitSampleSet(white)));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn divkit_whitening_free(map: *mut DivkitWhiteningMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
