//! C interface to `newton-infer`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`NiStatus`]; on failure, [`ni_last_error`] holds a message for the
//! calling thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use newton_infer::cli::{parse_config, Overrides, RunConfig};
use newton_infer::inference::{coverage_simulation, run_method, z_test_pvalues, MethodOutput, MethodSettings};
use newton_infer::model::Dataset;
use newton_infer::presets::{preset, PresetName};
use newton_infer::rng::{derive_seed, tag};
use newton_infer::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Config = 3,
    Numeric = 4,
    LinearAlgebra = 5,
    Divergence = 6,
    PartialFailure = 7,
    Io = 8,
    /// Output buffer has the wrong length.
    BufferSize = 9,
    /// The requested quantity does not exist for this result.
    Unavailable = 10,
    Panic = 11,
}

/// Dataset handle.
pub struct NiDataset {
    inner: Dataset,
}

/// Inference result handle.
pub struct NiResult {
    out: MethodOutput,
    pvalues: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NiStatus {
    match e {
        Error::Usage(_) => NiStatus::Usage,
        Error::Config { .. } | Error::Json(_) => NiStatus::Config,
        Error::Numeric(_) => NiStatus::Numeric,
        Error::LinearAlgebra(_) => NiStatus::LinearAlgebra,
        Error::Divergence(_) => NiStatus::Divergence,
        Error::PartialFailure { .. } => NiStatus::PartialFailure,
        Error::Io(_) | Error::Csv(_) => NiStatus::Io,
    }
}

enum Failure {
    Status(NiStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NiStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            NiStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(NiStatus::NullPointer, format!("`{what}` is NULL"))
}

unsafe fn opt_str<'a>(s: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Status(NiStatus::Usage, format!("`{what}` is not valid UTF-8")))
}

fn config_from_json(json: Option<&str>) -> Result<RunConfig, Failure> {
    let file = json.map(serde_json::from_str::<serde_json::Value>).transpose().map_err(Error::from)?;
    Ok(parse_config(PresetName::Lin1, None, file.as_ref(), &Overrides::default())?)
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != src.len() {
        return Err(Failure::Status(
            NiStatus::BufferSize,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

/// Message of the calling thread's last failure, or NULL. Valid until the
/// thread's next failing call.
#[no_mangle]
pub extern "C" fn ni_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ni_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy an `n × p` row-major design and `n` responses into a new dataset.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut NiDataset,
) -> NiStatus {
    guard(|| {
        if x.is_null() {
            return Err(null("x"));
        }
        if y.is_null() {
            return Err(null("y"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| Failure::Status(NiStatus::Usage, "n * p overflows".into()))?;
        let xs = std::slice::from_raw_parts(x, len).to_vec();
        let ys = std::slice::from_raw_parts(y, n).to_vec();
        let d = Dataset::new(xs, ys, p)?;
        *out = Box::into_raw(Box::new(NiDataset { inner: d }));
        Ok(())
    })
}

/// Generate the data set of a named preset (`lin1`, `tsma`, ...); the same
/// seed gives the same data as the command line's `--seed`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_from_preset(name: *const c_char, seed: u64, out: *mut *mut NiDataset) -> NiStatus {
    guard(|| {
        let name = opt_str(name, "name")?.ok_or_else(|| null("name"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = preset(name.parse()?).data.generate(derive_seed(seed, 0, tag::DATA))?;
        *out = Box::into_raw(Box::new(NiDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_free(d: *mut NiDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Sample count, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_n(d: *const NiDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n())
}

/// Feature count, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ni_dataset_p(d: *const NiDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.p())
}

/// Run inference on `data`. `config_json` (may be NULL) uses the command
/// line's JSON config schema; its `preset` supplies the defaults and the
/// loss (`lin1` when absent).
///
/// # Safety
/// `data` must be a live handle, `config_json` NULL or NUL-terminated, and
/// `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ni_infer(
    data: *const NiDataset,
    config_json: *const c_char,
    out: *mut *mut NiResult,
) -> NiStatus {
    guard(|| {
        let data = &data.as_ref().ok_or_else(|| null("data"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config_from_json(opt_str(config_json, "config_json")?)?;
        if cfg.data_path.is_some() {
            return Err(Error::config("data_path", "data comes from the handle").into());
        }
        cfg.validate_for(data)?;
        let res = run_method(
            data,
            &MethodSettings {
                method: cfg.method,
                loss: cfg.loss,
                newton: &cfg.newton,
                lag: cfg.lag,
                highdim: &cfg.highdim,
                level: cfg.level,
            },
        )?;
        let pvalues = match (&res.highdim, &res.covariance) {
            (Some(hd), _) => hd.estimate.pvalues(&vec![0.0; data.p()]),
            (None, Some(c)) => z_test_pvalues(&res.intervals.center, &vec![0.0; data.p()], c, data.n())?,
            (None, None) => Vec::new(),
        };
        *out = Box::into_raw(Box::new(NiResult { out: res, pvalues }));
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ni_result_free(r: *mut NiResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Dimension of the estimate, or 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ni_result_p(r: *const NiResult) -> usize {
    r.as_ref().map_or(0, |r| r.out.intervals.center.len())
}

/// Interval centres (the point estimate); `len` must equal p.
///
/// # Safety
/// `r` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_result_estimate(r: *const NiResult, out: *mut f64, len: usize) -> NiStatus {
    guard(|| copy_out(&r.as_ref().ok_or_else(|| null("result"))?.out.intervals.center, out, len))
}

/// Lower and upper interval ends; each buffer holds p values.
///
/// # Safety
/// `r` must be a live handle; `lower` and `upper` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_result_intervals(
    r: *const NiResult,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> NiStatus {
    guard(|| {
        let ci = &r.as_ref().ok_or_else(|| null("result"))?.out.intervals;
        copy_out(&ci.lower, lower, len)?;
        copy_out(&ci.upper, upper, len)
    })
}

/// Row-major `p × p` covariance of `√n(θ̂ − θ*)`; [`NiStatus::Unavailable`]
/// for high-dimensional results.
///
/// # Safety
/// `r` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_result_covariance(r: *const NiResult, out: *mut f64, len: usize) -> NiStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        let c = r.out.covariance.as_ref().ok_or_else(|| {
            Failure::Status(NiStatus::Unavailable, "this method produces per-coordinate variances only".into())
        })?;
        let p = c.p();
        let flat: Vec<f64> = (0..p * p).map(|k| c.matrix[(k / p, k % p)]).collect();
        copy_out(&flat, out, len)
    })
}

/// Two-sided p-values for `θ_j = 0`; `len` must equal p.
///
/// # Safety
/// `r` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_result_pvalues(r: *const NiResult, out: *mut f64, len: usize) -> NiStatus {
    guard(|| copy_out(&r.as_ref().ok_or_else(|| null("result"))?.pvalues, out, len))
}

/// Coverage simulation with a JSON config (NULL: the `lin1` preset) on
/// `threads` workers (0: all cores).
///
/// # Safety
/// `config_json` must be NULL or NUL-terminated; the three outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ni_coverage(
    config_json: *const c_char,
    seed: u64,
    threads: usize,
    coverage: *mut f64,
    avg_length: *mut f64,
    failures: *mut usize,
) -> NiStatus {
    guard(|| {
        if coverage.is_null() || avg_length.is_null() || failures.is_null() {
            return Err(null("output"));
        }
        let cfg = config_from_json(opt_str(config_json, "config_json")?)?;
        cfg.validate_sizes(cfg.data.n(), cfg.data.p())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Status(NiStatus::Usage, e.to_string()))?;
        let report = pool.install(|| coverage_simulation(&cfg.experiment(), cfg.n_sims, seed, cfg.method))?;
        *coverage = report.coverage;
        *avg_length = report.avg_length;
        *failures = report.failures;
        Ok(())
    })
}
