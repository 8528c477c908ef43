//! C interface to `euler_stat`.
//!
//! Every function returns an [`EsStatus`]. On failure a message is available
//! from [`es_last_error`] on the same thread until the next failing call.
//! Handles are opaque and must be released with their `_free` function.
//!
//! Field buffers use the flat cell order `i1 * n2 + i2`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use euler_stat::config::ExperimentConfig;
use euler_stat::ensemble::{self, EnsembleResult};
use euler_stat::leray::PoissonSolver;
use euler_stat::mesh::{ScalarField, VectorField};
use euler_stat::stats;
use euler_stat::{Error, ErrorKind, GridSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad arguments or configuration.
    Invalid = 2,
    /// The computation failed (non-convergence, non-finite values, broken invariants).
    Numerical = 3,
    /// File system or file format error.
    Io = 4,
    /// Internal panic caught at the boundary.
    Panic = 5,
}

/// Parsed experiment configuration.
pub struct EsConfig(ExperimentConfig);

/// Completed ensemble run, in memory or backed by a run directory.
pub struct EsEnsemble(EnsembleResult);

/// Discrete Leray projection on a fixed grid.
pub struct EsSolver(PoissonSolver);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EsEnsembleInfo {
    pub n1: usize,
    pub n2: usize,
    pub samples: usize,
    pub times: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Core(Error::InvalidParameter(msg.into()))
}

fn guard(f: impl FnOnce() -> FfiResult) -> EsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            EsStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            match e.kind() {
                ErrorKind::Usage => EsStatus::Invalid,
                ErrorKind::Numerical => EsStatus::Numerical,
                ErrorKind::Io => EsStatus::Io,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            EsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn es_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn es_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse configuration text (`key = value` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn es_config_parse(text: *const c_char, out: *mut *mut EsConfig) -> EsStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let cfg = ExperimentConfig::parse(text)?;
        write_out(out, EsConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from [`es_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn es_config_free(cfg: *mut EsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Override the worker thread count; 0 lets the thread pool decide.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn es_config_set_workers(cfg: *mut EsConfig, workers: usize) -> EsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or(Failure::Null("cfg"))?;
        cfg.0.ensemble.workers = workers;
        Ok(())
    })
}

/// Run the configured ensemble in memory.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn es_run_ensemble(cfg: *const EsConfig, out: *mut *mut EsEnsemble) -> EsStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let r = ensemble::run_ensemble(&cfg.0.ensemble)?;
        write_out(out, EsEnsemble(r))
    })
}

/// Run the configured ensemble into a run directory, resuming if it already
/// holds a matching partial run.
///
/// # Safety
/// `cfg` must be a live configuration handle, `dir` a NUL-terminated path
/// and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn es_run_in_dir(
    cfg: *const EsConfig,
    dir: *const c_char,
    out: *mut *mut EsEnsemble,
) -> EsStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let dir = PathBuf::from(c_str(dir, "dir")?);
        let r = ensemble::run_in_dir(&cfg.0.ensemble, &dir)?;
        write_out(out, EsEnsemble(r))
    })
}

/// Load a completed run directory.
///
/// # Safety
/// `dir` must be a NUL-terminated path and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_load(dir: *const c_char, out: *mut *mut EsEnsemble) -> EsStatus {
    guard(|| {
        let dir = PathBuf::from(c_str(dir, "dir")?);
        let r = ensemble::load_ensemble(&dir)?;
        write_out(out, EsEnsemble(r))
    })
}

/// # Safety
/// `ens` must be a live ensemble handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_save(ens: *const EsEnsemble, dir: *const c_char) -> EsStatus {
    guard(|| {
        let ens = as_ref(ens, "ens")?;
        let dir = PathBuf::from(c_str(dir, "dir")?);
        ensemble::save_ensemble(&ens.0, &dir)?;
        Ok(())
    })
}

/// # Safety
/// `ens` must be NULL or an ensemble handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_free(ens: *mut EsEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// # Safety
/// `ens` must be a live ensemble handle and `info` writable.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_info(ens: *const EsEnsemble, info: *mut EsEnsembleInfo) -> EsStatus {
    guard(|| {
        let ens = as_ref(ens, "ens")?;
        let info = info.as_mut().ok_or(Failure::Null("info"))?;
        let g = ens.0.config.grid;
        *info = EsEnsembleInfo {
            n1: g.n1(),
            n2: g.n2(),
            samples: ens.0.samples(),
            times: ens.0.times().len(),
        };
        Ok(())
    })
}

/// Output time with index `k`.
///
/// # Safety
/// `ens` must be a live ensemble handle and `t` writable.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_time(ens: *const EsEnsemble, k: usize, t: *mut f64) -> EsStatus {
    guard(|| {
        let ens = as_ref(ens, "ens")?;
        let t = t.as_mut().ok_or(Failure::Null("t"))?;
        *t = *ens
            .0
            .times()
            .get(k)
            .ok_or_else(|| invalid(format!("output index {k} out of range")))?;
        Ok(())
    })
}

fn check_indices(ens: &EnsembleResult, m: usize, k: usize) -> FfiResult {
    if m >= ens.samples() {
        return Err(invalid(format!("sample {m} out of range ({} samples)", ens.samples())));
    }
    if k >= ens.times().len() {
        return Err(invalid(format!("output index {k} out of range")));
    }
    Ok(())
}

/// Copy sample `m` at output index `k` into `u` and `v`, each of `len = n1 * n2`.
///
/// # Safety
/// `u` and `v` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn es_ensemble_copy_field(
    ens: *const EsEnsemble,
    m: usize,
    k: usize,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> EsStatus {
    guard(|| {
        let ens = as_ref(ens, "ens")?;
        check_indices(&ens.0, m, k)?;
        let n = ens.0.config.grid.len();
        if len != n {
            return Err(invalid(format!("buffer length {len}, grid has {n} cells")));
        }
        let (u, v) = (slice_mut(u, len, "u")?, slice_mut(v, len, "v")?);
        let f = ens.0.field(m, k)?;
        u.copy_from_slice(f.u().values());
        v.copy_from_slice(f.v().values());
        Ok(())
    })
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn es_solver_new(n1: usize, n2: usize, out: *mut *mut EsSolver) -> EsStatus {
    guard(|| {
        let s = PoissonSolver::new(GridSpec::new(n1, n2)?)?;
        write_out(out, EsSolver(s))
    })
}

/// # Safety
/// `solver` must be NULL or a solver handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn es_solver_free(solver: *mut EsSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Project `(u, v)` onto discretely divergence-free fields, in place.
///
/// # Safety
/// `u` and `v` must each point to `len = n1 * n2` readable and writable doubles.
#[no_mangle]
pub unsafe extern "C" fn es_project(solver: *const EsSolver, u: *mut f64, v: *mut f64, len: usize) -> EsStatus {
    guard(|| {
        let s = as_ref(solver, "solver")?;
        let g = s.0.grid();
        if len != g.len() {
            return Err(invalid(format!("buffer length {len}, grid has {} cells", g.len())));
        }
        let (u, v) = (slice_mut(u, len, "u")?, slice_mut(v, len, "v")?);
        let w = VectorField::new(
            ScalarField::from_values(g, u.to_vec())?,
            ScalarField::from_values(g, v.to_vec())?,
        )?;
        let p = s.0.project(&w)?;
        u.copy_from_slice(p.u().values());
        v.copy_from_slice(p.v().values());
        Ok(())
    })
}

/// Structure function of order `p` at output index `k` for `l = 1..=l_max`,
/// written to `values[0..l_max]`.
///
/// # Safety
/// `values` must point to `l_max` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn es_structure_function(
    ens: *const EsEnsemble,
    k: usize,
    p: f64,
    l_max: usize,
    values: *mut f64,
) -> EsStatus {
    guard(|| {
        let ens = as_ref(ens, "ens")?;
        let out = slice_mut(values, l_max, "values")?;
        let t = *ens
            .0
            .times()
            .get(k)
            .ok_or_else(|| invalid(format!("output index {k} out of range")))?;
        let curve = stats::structure_function(&ens.0.fields_at(k)?, p, l_max, t)?;
        out.copy_from_slice(&curve.values);
        Ok(())
    })
}

/// W1 distance between the k-point marginals of two ensembles at output
/// indices `ka` and `kb`, averaged over `tuples` seeded cell tuples.
///
/// Both ensembles must share the grid and the sample count.
///
/// # Safety
/// `a` and `b` must be live ensemble handles and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn es_wasserstein(
    a: *const EsEnsemble,
    ka: usize,
    b: *const EsEnsemble,
    kb: usize,
    k: usize,
    tuples: usize,
    tuple_seed: u64,
    value: *mut f64,
) -> EsStatus {
    guard(|| {
        let (a, b) = (as_ref(a, "a")?, as_ref(b, "b")?);
        let value = value.as_mut().ok_or(Failure::Null("value"))?;
        let fa = a.0.fields_at(ka)?;
        let fb = b.0.fields_at(kb)?;
        let t = a.0.times()[ka];
        *value = stats::wasserstein_marginal(&fa, &fb, k, tuples, tuple_seed, t)?.value;
        Ok(())
    })
}
