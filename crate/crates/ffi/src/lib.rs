//! C ABI for `allospec`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_build`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns an [`AllospecStatus`]; on failure a message describing
//! the last error on the calling thread is available from
//! [`allospec_last_error`]. Panics never unwind into the caller.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use allospec::bounds::{self, Constants};
use allospec::clustering::{cluster_points, misclassification_count, spectral_cluster};
use allospec::model::{self, AllometricModel, ModelFile, ModelSpec};
use allospec::numerics::{std_normal_cdf, Matrix, SymMatrix, Vector};
use allospec::sampler::{LabeledSample, MixtureSampler, RngStream};
use allospec::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllospecStatus {
    Ok = 0,
    /// Null pointer, bad length, or out-of-range argument.
    InvalidArgument = 1,
    /// Malformed JSON or a value rejected by a schema or model check.
    Config = 2,
    /// Eigensolver failure, indefinite matrix, or undefined sign convention.
    Numerical = 3,
    Unsupported = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

impl From<&Error> for AllospecStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::NotPositiveDefinite { .. } | Error::SignConventionUndefined => {
                AllospecStatus::Numerical
            }
            Error::InvalidInput(_) => AllospecStatus::InvalidArgument,
            Error::Unsupported(_) => AllospecStatus::Unsupported,
            Error::Io { .. } => AllospecStatus::Io,
            Error::LeadingGap { .. } | Error::Config { .. } | Error::ConfigSyntax { .. } | Error::Json(_) => {
                AllospecStatus::Config
            }
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (AllospecStatus, String)>) -> AllospecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AllospecStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AllospecStatus::Panic
        }
    }
}

type FfiResult<T> = Result<T, (AllospecStatus, String)>;

fn lib<T>(r: allospec::Result<T>) -> FfiResult<T> {
    r.map_err(|e| ((&e).into(), e.to_string()))
}

fn invalid<T>(msg: &str) -> FfiResult<T> {
    Err((AllospecStatus::InvalidArgument, msg.to_string()))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => invalid(&format!("{name} must not be null")),
    }
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => invalid(&format!("{name} must not be null")),
    }
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return invalid(&format!("{name} must not be null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return invalid(&format!("{name} must not be null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AllospecStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Opaque model handle.
pub struct AllospecModel(AllometricModel);

/// Opaque labeled-sample handle.
pub struct AllospecSample(LabeledSample);

/// Absolute constants of the bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllospecConstants {
    pub big_c: f64,
    pub small_c: f64,
    pub k: f64,
    pub k_g: f64,
}

impl From<AllospecConstants> for Constants {
    fn from(c: AllospecConstants) -> Self {
        Constants {
            big_c: c.big_c,
            small_c: c.small_c,
            k: c.k,
            k_g: c.k_g,
        }
    }
}

/// Both sides of the sample-size condition.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllospecCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Summary of one clustering of a labeled sample.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllospecClusterSummary {
    pub lambda1_hat: f64,
    pub misclustering_rate: f64,
    pub exact_recovery: bool,
    /// Set when the sample covariance has no clear leading eigenvalue.
    pub ill_conditioned: bool,
    /// Oracle-aligned misclassification count, or -1 when no alignment
    /// direction was given.
    pub misclassification_count: i64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn allospec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or null if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn allospec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn allospec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Standard normal distribution function.
#[no_mangle]
pub extern "C" fn allospec_std_normal_cdf(x: f64) -> f64 {
    std_normal_cdf(x)
}

/// Default constants: `C = 1`, `c = 0.01`, `K = √(32/(4−e))`, `K_g = √(8/3)`.
#[no_mangle]
pub extern "C" fn allospec_constants_default() -> AllospecConstants {
    let k = Constants::default();
    AllospecConstants {
        big_c: k.big_c,
        small_c: k.small_c,
        k: k.k,
        k_g: k.k_g,
    }
}

/// Builds a model from a JSON model spec (`n`, `mu_norm`, `mu_direction`,
/// `eigvals1`, `eigvals2`, `tail_basis`, `pi1`).
#[no_mangle]
pub unsafe extern "C" fn allospec_model_build(
    spec_json: *const c_char,
    out: *mut *mut AllospecModel,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec: ModelSpec = lib(serde_json::from_str(in_str(spec_json, "spec_json")?).map_err(Error::from))?;
        let m = lib(model::build_model(&spec))?;
        *out = Box::into_raw(Box::new(AllospecModel(m)));
        Ok(())
    })
}

/// Reads a model from its JSON file representation and validates it.
#[no_mangle]
pub unsafe extern "C" fn allospec_model_from_json(json: *const c_char, out: *mut *mut AllospecModel) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let file: ModelFile = lib(serde_json::from_str(in_str(json, "json")?).map_err(Error::from))?;
        let m = lib(file.into_model())?;
        lib(lib(model::validate_model(&m, model::TOL_ALIGN_FILE))?.into_result())?;
        *out = Box::into_raw(Box::new(AllospecModel(m)));
        Ok(())
    })
}

/// Assembles a model from `mu` (length `n`) and the packed lower triangles of
/// both covariances (length `n(n+1)/2`, row-major), then validates it with
/// alignment tolerance `tol`.
#[no_mangle]
pub unsafe extern "C" fn allospec_model_from_parts(
    n: usize,
    mu: *const f64,
    sigma1_packed: *const f64,
    sigma2_packed: *const f64,
    pi1: f64,
    tol: f64,
    out: *mut *mut AllospecModel,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if n == 0 {
            return invalid("n must be positive");
        }
        let packed = n * (n + 1) / 2;
        let mu = lib(Vector::new(in_slice(mu, n, "mu")?.to_vec()))?;
        let s1 = lib(SymMatrix::from_packed_lower(
            n,
            in_slice(sigma1_packed, packed, "sigma1_packed")?.to_vec(),
        ))?;
        let s2 = lib(SymMatrix::from_packed_lower(
            n,
            in_slice(sigma2_packed, packed, "sigma2_packed")?.to_vec(),
        ))?;
        let m = lib(AllometricModel::from_parts(mu, s1, s2, pi1))?;
        lib(lib(model::validate_model(&m, tol))?.into_result())?;
        *out = Box::into_raw(Box::new(AllospecModel(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn allospec_model_free(model: *mut AllospecModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn allospec_model_dim(model: *const AllospecModel, out: *mut usize) -> AllospecStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(model, "model")?.0.n();
        Ok(())
    })
}

/// Serializes the model; release the string with [`allospec_string_free`].
#[no_mangle]
pub unsafe extern "C" fn allospec_model_to_json(model: *const AllospecModel, out: *mut *mut c_char) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = into_c_string(lib(in_ref(model, "model")?.0.to_json())?);
        Ok(())
    })
}

/// Signal-to-noise ratio `‖μ‖² / max(λ₁(Σ₁), λ₁(Σ₂))`.
#[no_mangle]
pub unsafe extern "C" fn allospec_model_snr(model: *const AllospecModel, out: *mut f64) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = lib(model::snr(&in_ref(model, "model")?.0))?;
        Ok(())
    })
}

/// Runs every invariant check at tolerance `tol`; `passed` receives the
/// overall verdict. A failing check is not an error.
#[no_mangle]
pub unsafe extern "C" fn allospec_model_validate(
    model: *const AllospecModel,
    tol: f64,
    passed: *mut bool,
) -> AllospecStatus {
    guard(|| {
        let passed = out_ref(passed, "passed")?;
        *passed = lib(model::validate_model(&in_ref(model, "model")?.0, tol))?.passed;
        Ok(())
    })
}

/// Exact leading eigenvalue of the mixture covariance.
#[no_mangle]
pub unsafe extern "C" fn allospec_model_lambda1_mix(model: *const AllospecModel, out: *mut f64) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = lib(model::mixture_spectrum(&in_ref(model, "model")?.0))?.lambda1_mix;
        Ok(())
    })
}

/// Draws `m` labeled points from stream `(seed, stream_id)`.
#[no_mangle]
pub unsafe extern "C" fn allospec_sample_draw(
    model: *const AllospecModel,
    m: usize,
    seed: u64,
    stream_id: u64,
    out: *mut *mut AllospecSample,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let model = &in_ref(model, "model")?.0;
        let sampler = lib(MixtureSampler::new(model))?;
        let s = lib(sampler.sample(m, &mut RngStream::new(seed, stream_id)))?;
        *out = Box::into_raw(Box::new(AllospecSample(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn allospec_sample_free(sample: *mut AllospecSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

#[no_mangle]
pub unsafe extern "C" fn allospec_sample_dims(
    sample: *const AllospecSample,
    m: *mut usize,
    n: *mut usize,
) -> AllospecStatus {
    guard(|| {
        let s = &in_ref(sample, "sample")?.0;
        *out_ref(m, "m")? = s.m();
        *out_ref(n, "n")? = s.n();
        Ok(())
    })
}

/// Copies the points row-major into `buf`, which must hold `m·n` values.
#[no_mangle]
pub unsafe extern "C" fn allospec_sample_points(
    sample: *const AllospecSample,
    buf: *mut f64,
    len: usize,
) -> AllospecStatus {
    guard(|| {
        let s = &in_ref(sample, "sample")?.0;
        let src = s.points().as_slice();
        if len != src.len() || buf.is_null() {
            return invalid(&format!("buf must be non-null with length {}", src.len()));
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(src);
        Ok(())
    })
}

/// Copies the `±1` labels into `buf`, which must hold `m` values.
#[no_mangle]
pub unsafe extern "C" fn allospec_sample_labels(
    sample: *const AllospecSample,
    buf: *mut i8,
    len: usize,
) -> AllospecStatus {
    guard(|| {
        let s = &in_ref(sample, "sample")?.0;
        if len != s.m() || buf.is_null() {
            return invalid(&format!("buf must be non-null with length {}", s.m()));
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(s.labels());
        Ok(())
    })
}

/// Clusters a labeled sample and scores it. `align` (length `n`, may be
/// null) fixes the sign of the estimated eigenvector for the
/// misclassification count.
#[no_mangle]
pub unsafe extern "C" fn allospec_sample_cluster(
    sample: *const AllospecSample,
    align: *const f64,
    out: *mut AllospecClusterSummary,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = &in_ref(sample, "sample")?.0;
        let r = lib(spectral_cluster(s))?;
        let count = if align.is_null() {
            -1
        } else {
            lib(misclassification_count(s, &r.fit, slice::from_raw_parts(align, s.n())))? as i64
        };
        *out = AllospecClusterSummary {
            lambda1_hat: r.fit.lambda1_hat,
            misclustering_rate: r.misclustering_rate,
            exact_recovery: r.exact_recovery,
            ill_conditioned: r.fit.ill_conditioned,
            misclassification_count: count,
        };
        Ok(())
    })
}

/// Clusters unlabeled points (`m×n`, row-major). Writes the cluster sign of
/// every point to `signs` (length `m`) and, if non-null, the unit leading
/// eigenvector to `gamma` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn allospec_cluster_points(
    points: *const f64,
    m: usize,
    n: usize,
    signs: *mut i8,
    gamma: *mut f64,
) -> AllospecStatus {
    guard(|| {
        if signs.is_null() {
            return invalid("signs must not be null");
        }
        let data = in_slice(points, m * n, "points")?.to_vec();
        let fit = lib(cluster_points(&lib(Matrix::from_row_major(m, n, data))?))?;
        slice::from_raw_parts_mut(signs, m).copy_from_slice(&fit.signs);
        if !gamma.is_null() {
            slice::from_raw_parts_mut(gamma, n).copy_from_slice(fit.gamma1_hat.as_slice());
        }
        Ok(())
    })
}

/// Per-point misclassification bound `Φ(−(1−α)‖μ‖/√maxλ₁) + 6e^{−n}`.
#[no_mangle]
pub unsafe extern "C" fn allospec_misclassification_bound(
    model: *const AllospecModel,
    alpha: f64,
    n: f64,
    out: *mut f64,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sm = lib(in_ref(model, "model")?.0.summary())?;
        *out = lib(bounds::misclassification_bound(alpha, &sm, n))?;
        Ok(())
    })
}

/// Mills-ratio form of the misclassification bound.
#[no_mangle]
pub unsafe extern "C" fn allospec_mills_bound(alpha: f64, eta: f64, n: f64, out: *mut f64) -> AllospecStatus {
    guard(|| {
        *out_ref(out, "out")? = lib(bounds::mills_bound(alpha, eta, n))?;
        Ok(())
    })
}

/// Evaluates the sample-size condition; `constants` may be null for the
/// defaults.
#[no_mangle]
pub unsafe extern "C" fn allospec_condition(
    model: *const AllospecModel,
    m: f64,
    n: f64,
    alpha: f64,
    constants: *const AllospecConstants,
    out: *mut AllospecCondition,
) -> AllospecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sm = lib(in_ref(model, "model")?.0.summary())?;
        let k: Constants = constants.as_ref().map_or_else(Constants::default, |c| (*c).into());
        lib(k.validate())?;
        let c = lib(bounds::condition_general(m, n, alpha, &sm, &k))?;
        *out = AllospecCondition {
            lhs: c.lhs,
            rhs: c.rhs,
            holds: c.holds,
        };
        Ok(())
    })
}
