//! C ABI for `timerev`.
//!
//! Objects cross the boundary as opaque handles created by `tr_*_new` /
//! `tr_*_from_*` functions and released by the matching `tr_*_free`.
//! Every fallible call returns a [`TrStatus`]; on failure a description is
//! available from [`tr_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use timerev::density::{exact_flow_density, SharedDensity};
use timerev::ensemble::PathEnsemble;
use timerev::entropy::{current_osmosis_decomposition, h_fn, rw_relative_entropy};
use timerev::grid::TimeGrid;
use timerev::models::{forward_marginals, BuiltModel, ModelDescriptor};
use timerev::reversal::ReversedDrift;
use timerev::simulate::{euler_maruyama, SimConfig};
use timerev::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parameter = 3,
    Simulation = 4,
    Numeric = 5,
    Support = 6,
    Consistency = 7,
    Config = 8,
    Domain = 9,
    Format = 10,
    Io = 11,
    BufferTooSmall = 12,
    WrongModelKind = 13,
    Panic = 14,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TrStatus {
    match e {
        Error::Parameter(_) => TrStatus::Parameter,
        Error::Simulation { .. } => TrStatus::Simulation,
        Error::Numeric(_) => TrStatus::Numeric,
        Error::Support(_) | Error::Bandwidth(_) => TrStatus::Support,
        Error::Consistency(_) => TrStatus::Consistency,
        Error::Config(_) => TrStatus::Config,
        Error::Domain(_) => TrStatus::Domain,
        Error::Format(_) | Error::Json(_) => TrStatus::Format,
        Error::Io(_) => TrStatus::Io,
    }
}

fn fail(status: TrStatus, msg: impl Into<String>) -> TrStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TrStatus>) -> TrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TrStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TrStatus>;
}

impl<T> OrStatus<T> for timerev::Result<T> {
    fn or_status(self) -> Result<T, TrStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, TrStatus> {
    if p.is_null() {
        return Err(fail(TrStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TrStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, TrStatus> {
    p.as_ref().ok_or_else(|| fail(TrStatus::NullPointer, "null handle"))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, TrStatus> {
    p.as_mut().ok_or_else(|| fail(TrStatus::NullPointer, "null output pointer"))
}

fn into_c_string(s: String) -> Result<*mut c_char, TrStatus> {
    CString::new(s).map(CString::into_raw).map_err(|_| fail(TrStatus::Format, "output contains NUL"))
}

/// Last error message on this thread, or NULL. Valid until the next call
/// into the library on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `x log x - x + 1`, `1` at zero and `+inf` for negative arguments.
#[no_mangle]
pub extern "C" fn tr_h(x: f64) -> f64 {
    h_fn(x)
}

/// Opaque model: a diffusion or a graph walk built from a JSON descriptor.
pub struct TrModel {
    descriptor: ModelDescriptor,
    built: BuiltModel,
}

/// Opaque ensemble of discretised diffusion paths.
pub struct TrEnsemble {
    inner: PathEnsemble,
}

/// Opaque reversed drift of a diffusion whose marginals are known in closed form.
pub struct TrReversal {
    drift: ReversedDrift,
}

/// Builds a model from a JSON descriptor such as
/// `{"type": "ou", "dim": 1}` or `{"type": "cycle", "n": 4, "rate_cw": 2, "rate_ccw": 1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_model_from_json(json: *const c_char, out: *mut *mut TrModel) -> TrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let descriptor = ModelDescriptor::from_json(str_arg(json)?).or_status()?;
        let built = descriptor.build().or_status()?;
        *out = Box::into_raw(Box::new(TrModel { descriptor, built }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tr_model_from_json`] (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn tr_model_free(model: *mut TrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State-space dimension (diffusions) or number of states (walks).
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_model_dim(model: *const TrModel, out: *mut usize) -> TrStatus {
    guard(|| {
        let m = handle(model)?;
        *out_ptr(out)? = match &m.built {
            BuiltModel::Diffusion(d) => d.spec.dim(),
            BuiltModel::Walk(w) => w.n_states(),
        };
        Ok(())
    })
}

/// Model descriptor as JSON; free with [`tr_string_free`].
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_model_to_json(model: *const TrModel, out: *mut *mut c_char) -> TrStatus {
    guard(|| {
        let m = handle(model)?;
        let s = serde_json::to_string(&m.descriptor).map_err(|e| fail(TrStatus::Format, e.to_string()))?;
        *out_ptr(out)? = into_c_string(s)?;
        Ok(())
    })
}

fn diffusion(m: &TrModel) -> Result<&timerev::models::DiffusionModel, TrStatus> {
    match &m.built {
        BuiltModel::Diffusion(d) => Ok(d),
        BuiltModel::Walk(_) => Err(fail(TrStatus::WrongModelKind, "diffusion model expected")),
    }
}

/// Euler-Maruyama ensemble of `n_paths` paths on `n_steps` steps of `[0, horizon]`.
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_simulate(
    model: *const TrModel,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    out: *mut *mut TrEnsemble,
) -> TrStatus {
    guard(|| {
        let d = diffusion(handle(model)?)?;
        let out = out_ptr(out)?;
        let grid = TimeGrid::new(horizon, n_steps).or_status()?;
        let cfg = SimConfig::new(n_paths, seed, grid).or_status()?;
        let inner = euler_maruyama(&d.spec, &cfg).or_status()?;
        *out = Box::into_raw(Box::new(TrEnsemble { inner }));
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_free(e: *mut TrEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Shape of an ensemble; any output pointer may be NULL.
///
/// # Safety
/// Valid handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_shape(
    e: *const TrEnsemble,
    dim: *mut usize,
    n_paths: *mut usize,
    n_steps: *mut usize,
    horizon: *mut f64,
) -> TrStatus {
    guard(|| {
        let e = &handle(e)?.inner;
        if let Some(d) = dim.as_mut() {
            *d = e.dim();
        }
        if let Some(n) = n_paths.as_mut() {
            *n = e.n_paths();
        }
        if let Some(n) = n_steps.as_mut() {
            *n = e.grid().n_steps();
        }
        if let Some(h) = horizon.as_mut() {
            *h = e.grid().horizon();
        }
        Ok(())
    })
}

/// Copies the row-major `n_paths x (n_steps + 1) x dim` tensor into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_copy(e: *const TrEnsemble, buf: *mut f64, len: usize) -> TrStatus {
    guard(|| {
        let data = handle(e)?.inner.as_slice();
        if buf.is_null() {
            return Err(fail(TrStatus::NullPointer, "null buffer"));
        }
        if len < data.len() {
            return Err(fail(TrStatus::BufferTooSmall, format!("need {} doubles, got {len}", data.len())));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Time-reversed copy of an ensemble.
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_flip(e: *const TrEnsemble, out: *mut *mut TrEnsemble) -> TrStatus {
    guard(|| {
        let flipped = handle(e)?.inner.flip();
        *out_ptr(out)? = Box::into_raw(Box::new(TrEnsemble { inner: flipped }));
        Ok(())
    })
}

/// Writes the binary container to `path`.
///
/// # Safety
/// Valid handle and NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_write(e: *const TrEnsemble, path: *const c_char) -> TrStatus {
    guard(|| {
        let e = handle(e)?;
        let file = std::fs::File::create(Path::new(str_arg(path)?)).map_err(|x| fail(TrStatus::Io, x.to_string()))?;
        e.inner.write_binary(std::io::BufWriter::new(file)).or_status()
    })
}

/// Reads a binary container written by [`tr_ensemble_write`].
///
/// # Safety
/// NUL-terminated path and valid output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_ensemble_read(path: *const c_char, out: *mut *mut TrEnsemble) -> TrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let file = std::fs::File::open(Path::new(str_arg(path)?)).map_err(|x| fail(TrStatus::Io, x.to_string()))?;
        let inner = PathEnsemble::read_binary(std::io::BufReader::new(file)).or_status()?;
        *out = Box::into_raw(Box::new(TrEnsemble { inner }));
        Ok(())
    })
}

fn exact_density(d: &timerev::models::DiffusionModel) -> Result<SharedDensity, TrStatus> {
    let flow = d
        .flow
        .as_ref()
        .ok_or_else(|| fail(TrStatus::Config, "model has no closed-form marginal flow"))?;
    Ok(Arc::new(exact_flow_density(flow).or_status()?))
}

/// Reversed drift of a linear model with Gaussian initial law on `[0, horizon]`.
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_reversal_new(model: *const TrModel, horizon: f64, out: *mut *mut TrReversal) -> TrStatus {
    guard(|| {
        let d = diffusion(handle(model)?)?;
        let out = out_ptr(out)?;
        let density = exact_density(d)?;
        let drift = timerev::reversal::reversed_drift(&d.spec.drift, &d.spec.diffusion, &d.spec.div_diffusion, density, horizon)
            .or_status()?;
        *out = Box::into_raw(Box::new(TrReversal { drift }));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`tr_reversal_new`] (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn tr_reversal_free(r: *mut TrReversal) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Evaluates the reversed drift at reversed time `t` and point `x`
/// (`dim` doubles) into `out` (`dim` doubles). `flags`, if non-NULL,
/// receives bit 0 = below support floor, bit 1 = singular diffusion,
/// bit 2 = magnitude capped.
///
/// # Safety
/// `x` and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn tr_reversed_drift(
    r: *const TrReversal,
    t: f64,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    flags: *mut u32,
) -> TrStatus {
    guard(|| {
        let r = handle(r)?;
        if x.is_null() || out.is_null() {
            return Err(fail(TrStatus::NullPointer, "null point or output"));
        }
        if dim != r.drift.dim() {
            return Err(fail(TrStatus::Parameter, format!("dimension {dim} != {}", r.drift.dim())));
        }
        let ev = r.drift.evaluate(t, std::slice::from_raw_parts(x, dim));
        ptr::copy_nonoverlapping(ev.value.as_ptr(), out, dim);
        if let Some(f) = flags.as_mut() {
            *f = u32::from(ev.below_floor) | (u32::from(ev.singular) << 1) | (u32::from(ev.capped) << 2);
        }
        Ok(())
    })
}

/// Relative entropy of a walk model against the counting walk on `[0, horizon]`,
/// with marginals from the master equation on `n_steps` steps.
///
/// # Safety
/// Valid handle and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_rw_relative_entropy(model: *const TrModel, horizon: f64, n_steps: usize, out: *mut f64) -> TrStatus {
    guard(|| {
        let m = handle(model)?;
        let out = out_ptr(out)?;
        let BuiltModel::Walk(w) = &m.built else {
            return Err(fail(TrStatus::WrongModelKind, "walk model expected"));
        };
        let grid = TimeGrid::new(horizon, n_steps).or_status()?;
        let table = forward_marginals(w, &grid, 8);
        *out = rw_relative_entropy(w, &table, &grid).or_status()?;
        Ok(())
    })
}

/// Current-osmosis entropy report of a diffusion model with closed-form
/// marginals, as JSON. Free the string with [`tr_string_free`].
///
/// # Safety
/// Valid handles and output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_entropy_report_json(
    model: *const TrModel,
    ensemble: *const TrEnsemble,
    out: *mut *mut c_char,
) -> TrStatus {
    guard(|| {
        let d = diffusion(handle(model)?)?;
        let e = &handle(ensemble)?.inner;
        let out = out_ptr(out)?;
        let report = current_osmosis_decomposition(&d.spec.drift, exact_density(d)?, &d.reference, e).or_status()?;
        let s = serde_json::to_string(&report).map_err(|x| fail(TrStatus::Format, x.to_string()))?;
        *out = into_c_string(s)?;
        Ok(())
    })
}

/// Runs the configured experiment, writing artifacts to the configured
/// output directory (or `out_dir` when non-NULL). `exit_code` receives
/// 0 when every check passes and 1 otherwise.
///
/// # Safety
/// NUL-terminated strings; valid output pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_run_config(config_path: *const c_char, out_dir: *const c_char, exit_code: *mut i32) -> TrStatus {
    guard(|| {
        let code = out_ptr(exit_code)?;
        let cfg = timerev::cli::ExperimentConfig::load(Path::new(str_arg(config_path)?)).or_status()?;
        let dir = if out_dir.is_null() { cfg.output_dir.clone() } else { str_arg(out_dir)?.into() };
        let outcomes = timerev::cli::run_all(&cfg, &dir).or_status()?;
        *code = if outcomes.iter().all(|o| o.pass) { 0 } else { 1 };
        Ok(())
    })
}
