//! C interface to `emdq`.
//!
//! Point sets and query outcomes are opaque handles created and freed through
//! this API. Every fallible call returns an [`EmdqStatus`]; on failure
//! [`emdq_last_error_message`] describes the most recent error on the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emdq::query::{LevelTrace, QueryOutcome};
use emdq::transport::{sinkhorn_cost, Regularization};
use emdq::{
    emd_query, solve_exact, EmdError, PointSource, QueryParams, SinkhornParams, SolverChoice, SplitMode,
    TransportInstance, Verdict, WeightedPointSet,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Imbalance = 4,
    SolverFailure = 5,
    TooLarge = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdqVerdict {
    /// EMD is above the threshold.
    Case1 = 1,
    /// EMD is below the threshold.
    Case2 = 2,
    /// EMD is within `epsilon * delta_tilde` of the threshold.
    Case3 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmdqSolver {
    Exact = 0,
    Sinkhorn = 1,
}

/// Query settings. Obtain defaults from [`emdq_query_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EmdqQueryOptions {
    pub threshold: f64,
    pub epsilon: f64,
    /// One of the `EmdqSolver` values.
    pub solver: u32,
    /// Sinkhorn regularization as a multiple of the largest distance.
    pub eta_factor: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Doubling dimension for fixed-round splitting; 0 selects adaptive.
    pub rho: u32,
}

/// One level of a query trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EmdqLevel {
    pub level: u32,
    pub node_count: usize,
    pub surplus_sources: usize,
    pub surplus_sinks: usize,
    pub estimate: f64,
    pub band: f64,
    pub target_radius: f64,
    pub elapsed_secs: f64,
}

/// Opaque weighted point set.
pub struct EmdqPointSet(WeightedPointSet);

/// Opaque query result.
pub struct EmdqOutcome(QueryOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &EmdError) -> EmdqStatus {
    match err {
        EmdError::DimensionMismatch { .. } => EmdqStatus::DimensionMismatch,
        EmdError::Imbalance { .. } => EmdqStatus::Imbalance,
        EmdError::Solver(_) => EmdqStatus::SolverFailure,
        EmdError::TooLarge { .. } => EmdqStatus::TooLarge,
        _ => EmdqStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic for `emdq_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), EmdqStatus>) -> EmdqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmdqStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EmdqStatus::Panic
        }
    }
}

fn fail(err: EmdError) -> EmdqStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> EmdqStatus {
    set_error(format!("{what} is null"));
    EmdqStatus::NullPointer
}

/// # Safety
/// `p` is null or points to a live value of type `T`.
unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, EmdqStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Creates a point set from `n * dim` row-major coordinates and `n` weights.
/// `weights` may be null for unit weights. On success `*out` owns a new
/// handle that must be released with [`emdq_point_set_free`].
///
/// # Safety
/// `coords` must point to `n * dim` readable doubles, `weights` (if not null)
/// to `n`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emdq_point_set_new(
    coords: *const f64,
    n: usize,
    dim: usize,
    weights: *const f64,
    out: *mut *mut EmdqPointSet,
) -> EmdqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if coords.is_null() {
            return Err(null("coords"));
        }
        let len = n.checked_mul(dim).ok_or_else(|| fail(EmdError::InvalidArgument("n * dim overflows".into())))?;
        let coords = std::slice::from_raw_parts(coords, len).to_vec();
        let weights = if weights.is_null() {
            vec![1.0; n]
        } else {
            std::slice::from_raw_parts(weights, n).to_vec()
        };
        let set = WeightedPointSet::new(coords, dim, weights).map_err(fail)?;
        *out = Box::into_raw(Box::new(EmdqPointSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` is null or a handle from [`emdq_point_set_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emdq_point_set_free(set: *mut EmdqPointSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `set` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_point_set_len(set: *const EmdqPointSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `set` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_point_set_dim(set: *const EmdqPointSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `set` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_point_set_total_weight(set: *const EmdqPointSet) -> f64 {
    set.as_ref().map_or(0.0, |s| s.0.total_weight())
}

#[no_mangle]
pub extern "C" fn emdq_query_options_default() -> EmdqQueryOptions {
    let sk = SinkhornParams::default();
    EmdqQueryOptions {
        threshold: 0.0,
        epsilon: 0.05,
        solver: EmdqSolver::Exact as u32,
        eta_factor: match sk.reg {
            Regularization::Relative(f) | Regularization::Absolute(f) => f,
        },
        max_iter: sk.max_iter,
        tol: sk.tol,
        rho: 0,
    }
}

fn sinkhorn_params(eta_factor: f64, max_iter: usize, tol: f64) -> SinkhornParams {
    SinkhornParams {
        reg: Regularization::Relative(eta_factor),
        max_iter,
        tol,
    }
}

/// Runs a threshold query. On success `*out` owns a new outcome handle that
/// must be released with [`emdq_outcome_free`].
///
/// # Safety
/// `a` and `b` are live point-set handles, `options` points to a valid
/// options record, and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn emdq_query(
    a: *const EmdqPointSet,
    b: *const EmdqPointSet,
    options: *const EmdqQueryOptions,
    out: *mut *mut EmdqOutcome,
) -> EmdqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        let opts = deref(options, "options")?;
        let params = QueryParams {
            solver: match opts.solver {
                s if s == EmdqSolver::Exact as u32 => SolverChoice::Exact,
                s if s == EmdqSolver::Sinkhorn as u32 => {
                    SolverChoice::Sinkhorn(sinkhorn_params(opts.eta_factor, opts.max_iter, opts.tol))
                }
                s => return Err(fail(EmdError::InvalidArgument(format!("unknown solver {s}")))),
            },
            mode: if opts.rho == 0 {
                SplitMode::Adaptive
            } else {
                SplitMode::Fixed { rho: opts.rho }
            },
            ..QueryParams::new(opts.threshold, opts.epsilon)
        };
        let outcome = emd_query(&a.0, &b.0, &params).map_err(fail)?;
        *out = Box::into_raw(Box::new(EmdqOutcome(outcome)));
        Ok(())
    })
}

/// # Safety
/// `outcome` is null or a handle from [`emdq_query`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_free(outcome: *mut EmdqOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `outcome` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_verdict(outcome: *const EmdqOutcome, verdict: *mut EmdqVerdict) -> EmdqStatus {
    guard(|| {
        let o = deref(outcome, "outcome")?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        *verdict = match o.0.verdict {
            Verdict::Case1 => EmdqVerdict::Case1,
            Verdict::Case2 => EmdqVerdict::Case2,
            Verdict::Case3 => EmdqVerdict::Case3,
        };
        Ok(())
    })
}

/// `delta_tilde` of the query, or NaN for a null handle.
///
/// # Safety
/// `outcome` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_delta_tilde(outcome: *const EmdqOutcome) -> f64 {
    outcome.as_ref().map_or(f64::NAN, |o| o.0.delta_tilde)
}

/// # Safety
/// `outcome` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_h_max(outcome: *const EmdqOutcome) -> u32 {
    outcome.as_ref().map_or(0, |o| o.0.h_max)
}

/// # Safety
/// `outcome` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_level_count(outcome: *const EmdqOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.0.levels.len())
}

/// Copies trace entry `index` into `*level`.
///
/// # Safety
/// `outcome` is a live handle and `level` is writable.
#[no_mangle]
pub unsafe extern "C" fn emdq_outcome_level(
    outcome: *const EmdqOutcome,
    index: usize,
    level: *mut EmdqLevel,
) -> EmdqStatus {
    guard(|| {
        let o = deref(outcome, "outcome")?;
        if level.is_null() {
            return Err(null("level"));
        }
        let t: &LevelTrace = o.0.levels.get(index).ok_or_else(|| {
            fail(EmdError::InvalidArgument(format!(
                "level index {index} out of range for {} levels",
                o.0.levels.len()
            )))
        })?;
        *level = EmdqLevel {
            level: t.level,
            node_count: t.node_count,
            surplus_sources: t.surplus_sources,
            surplus_sinks: t.surplus_sinks,
            estimate: t.estimate,
            band: t.band,
            target_radius: t.target_radius,
            elapsed_secs: t.elapsed_secs,
        };
        Ok(())
    })
}

unsafe fn instance(a: *const EmdqPointSet, b: *const EmdqPointSet) -> Result<TransportInstance, EmdqStatus> {
    let (a, b) = (deref(a, "a")?, deref(b, "b")?);
    TransportInstance::new(a.0.clone(), b.0.clone()).map_err(fail)
}

/// Exact EMD (optimal cost divided by total weight).
///
/// # Safety
/// `a`, `b` are live handles and `emd` is writable.
#[no_mangle]
pub unsafe extern "C" fn emdq_exact_emd(a: *const EmdqPointSet, b: *const EmdqPointSet, emd: *mut f64) -> EmdqStatus {
    guard(|| {
        if emd.is_null() {
            return Err(null("emd"));
        }
        let inst = instance(a, b)?;
        *emd = solve_exact(&inst).map_err(fail)?.emd();
        Ok(())
    })
}

/// EMD of the rounded Sinkhorn plan; an upper bound on the exact value.
///
/// # Safety
/// `a`, `b` are live handles and `emd` is writable.
#[no_mangle]
pub unsafe extern "C" fn emdq_sinkhorn_emd(
    a: *const EmdqPointSet,
    b: *const EmdqPointSet,
    eta_factor: f64,
    max_iter: usize,
    tol: f64,
    emd: *mut f64,
) -> EmdqStatus {
    guard(|| {
        if emd.is_null() {
            return Err(null("emd"));
        }
        let inst = instance(a, b)?;
        let (cost, _) = sinkhorn_cost(&inst, &sinkhorn_params(eta_factor, max_iter, tol)).map_err(fail)?;
        let w = inst.total_mass();
        *emd = if w > 0.0 { cost / w } else { 0.0 };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn emdq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emdq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
