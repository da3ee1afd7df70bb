//! C ABI over `disclosure-core`.
//!
//! Objects are opaque handles created from JSON and released with the
//! matching `_free` function. Every fallible call returns a [`DscStatus`];
//! on failure [`dsc_last_error`] describes what went wrong on this thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use disclosure_core::config::{distribution_from_json, pair_from_json, BuildError, Overrides, RunConfig};
use disclosure_core::deadline::{deadline_payoff, optimize_deadline, t_underline, Deadline, DeadlineError};
use disclosure_core::distribution::BreakthroughDist;
use disclosure_core::euler::{solve_with, EulerError, SolveOptions};
use disclosure_core::frontier::TechnologyPair;
use disclosure_core::insurance::UiPrimitives;

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or invalid input values.
    Config = 3,
    /// The primitives violate a model assumption.
    Model = 4,
    Solver = 5,
    /// A caller-supplied buffer has the wrong length.
    BufferSize = 6,
    Panic = 7,
}

/// A technology pair with its structural constants.
pub struct DscPair {
    pair: TechnologyPair,
    insurance: Option<UiPrimitives>,
}

/// A discrete breakthrough-time distribution.
pub struct DscDist {
    dist: BreakthroughDist,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DscConstants {
    pub u0: f64,
    pub u1: f64,
    pub u_star: f64,
    pub alpha: f64,
    pub affine_gap: f64,
    pub t_underline: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DscDeadline {
    /// Optimal deadline; `INFINITY` when disclosure is never rewarded below u0.
    pub t_star: f64,
    pub t_underline: f64,
    pub pi: f64,
    pub foc_satisfied: bool,
    /// Set when the optimizer fell back to `T = INFINITY`.
    pub anomaly: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DscEuler {
    pub lambda_star: f64,
    pub payoff: f64,
    pub x0: f64,
    pub residual_max: f64,
    pub roots: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(DscStatus, String);

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> DscStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DscStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DscStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DscStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(DscStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn deadline_fail(e: DeadlineError) -> Fail {
    match e {
        DeadlineError::NoConflict { .. } => Fail(DscStatus::Model, e.to_string()),
        DeadlineError::Negative(_) => Fail(DscStatus::Config, e.to_string()),
        other => Fail(DscStatus::Solver, other.to_string()),
    }
}

fn euler_fail(e: EulerError) -> Fail {
    match e {
        EulerError::NotSimple { .. } | EulerError::AtomAtZero(_) | EulerError::UnequalSupport => {
            Fail(DscStatus::Model, e.to_string())
        }
        other => Fail(DscStatus::Solver, other.to_string()),
    }
}

/// Message for the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn dsc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dsc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a technology pair from JSON: either a bare technology object or
/// `{"technology": ..., "r": ...}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_pair_from_json(json: *const c_char, out: *mut *mut DscPair) -> DscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let (pair, insurance) = pair_from_json(text).map_err(|e| match e {
            BuildError::Config(m) => Fail(DscStatus::Config, m),
            BuildError::Model(m) => Fail(DscStatus::Model, m),
            BuildError::Solver(m) => Fail(DscStatus::Solver, m),
        })?;
        *out = Box::into_raw(Box::new(DscPair { pair, insurance }));
        Ok(())
    })
}

/// # Safety
/// `pair` must come from [`dsc_pair_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dsc_pair_free(pair: *mut DscPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// # Safety
/// `pair` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_pair_constants(pair: *const DscPair, out: *mut DscConstants) -> DscStatus {
    guard(|| {
        let p = &handle(pair, "pair")?.pair;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let solver = |e: disclosure_core::frontier::FrontierError| Fail(DscStatus::Solver, e.to_string());
        *out = DscConstants {
            u0: p.u0,
            u1: p.u1,
            u_star: p.u_star,
            alpha: p.alpha().map_err(solver)?,
            affine_gap: p.affine_gap().map_err(solver)?,
            t_underline: t_underline(p).map_err(deadline_fail)?,
        };
        Ok(())
    })
}

/// Builds a distribution from `{"atoms": [[t, p], ...]}` or
/// `{"family": {"kind": ...}, "m": n}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_dist_from_json(json: *const c_char, out: *mut *mut DscDist) -> DscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let dist = distribution_from_json(text).map_err(|e| Fail(DscStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(DscDist { dist }));
        Ok(())
    })
}

/// # Safety
/// `dist` must come from [`dsc_dist_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dsc_dist_free(dist: *mut DscDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `dist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsc_dist_len(dist: *const DscDist) -> usize {
    dist.as_ref().map_or(0, |d| d.dist.len())
}

/// Optimal deadline mechanism.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_optimize_deadline(
    pair: *const DscPair,
    dist: *const DscDist,
    tol: f64,
    out: *mut DscDeadline,
) -> DscStatus {
    guard(|| {
        let p = &handle(pair, "pair")?.pair;
        let g = &handle(dist, "dist")?.dist;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Fail(DscStatus::Config, format!("tolerance must be positive, got {tol}")));
        }
        let sol = optimize_deadline(p, g, tol).map_err(deadline_fail)?;
        *out = DscDeadline {
            t_star: match sol.t_star {
                Deadline::At(t) => t,
                Deadline::Never => f64::INFINITY,
            },
            t_underline: sol.t_underline,
            pi: sol.pi,
            foc_satisfied: sol.foc.satisfied,
            anomaly: sol.anomaly.is_some(),
        };
        Ok(())
    })
}

/// Principal payoff of the deadline mechanism with deadline `t`
/// (`INFINITY` for never).
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_deadline_payoff(
    pair: *const DscPair,
    dist: *const DscDist,
    t: f64,
    out: *mut f64,
) -> DscStatus {
    guard(|| {
        let p = &handle(pair, "pair")?.pair;
        let g = &handle(dist, "dist")?.dist;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = if t == f64::INFINITY {
            Deadline::Never
        } else if t.is_nan() {
            return Err(Fail(DscStatus::Config, "deadline is NaN".into()));
        } else {
            Deadline::At(t)
        };
        *out = deadline_payoff(p, g, d).map_err(deadline_fail)?;
        Ok(())
    })
}

/// Solves the Euler system for a simple pair. `levels` and `rewards` may be
/// NULL; otherwise each must hold `len == dsc_dist_len(dist)` doubles and
/// receives u_k and X_k per atom.
///
/// # Safety
/// Handles must be live, `out` valid, and non-null buffers hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsc_solve_euler(
    pair: *const DscPair,
    dist: *const DscDist,
    out: *mut DscEuler,
    levels: *mut f64,
    rewards: *mut f64,
    len: usize,
) -> DscStatus {
    guard(|| {
        let h = handle(pair, "pair")?;
        let g = &handle(dist, "dist")?.dist;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if (!levels.is_null() || !rewards.is_null()) && len != g.len() {
            return Err(Fail(
                DscStatus::BufferSize,
                format!("buffer length {len} but distribution has {} atoms", g.len()),
            ));
        }
        let opts = SolveOptions {
            allow_boundary_u_star: h.insurance.is_some(),
            ..SolveOptions::default()
        };
        let sol = solve_with(&h.pair, g, &opts).map_err(euler_fail)?;
        *out = DscEuler {
            lambda_star: sol.lambda_star,
            payoff: sol.payoff,
            x0: sol.x0(),
            residual_max: sol.residuals.max_abs(),
            roots: sol.roots.len(),
        };
        if !levels.is_null() {
            std::slice::from_raw_parts_mut(levels, len).copy_from_slice(&sol.levels);
        }
        if !rewards.is_null() {
            std::slice::from_raw_parts_mut(rewards, len).copy_from_slice(&sol.rewards);
        }
        Ok(())
    })
}

/// Runs a full CLI configuration and returns `report.json` as a string to
/// release with [`dsc_string_free`]. Model and solver failures still produce
/// a report; the status says which.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsc_run_config(config_json: *const c_char, report: *mut *mut c_char) -> DscStatus {
    let mut status = DscStatus::Ok;
    let outer = guard(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        *report = ptr::null_mut();
        let text = read_str(config_json, "config_json")?;
        let cfg = RunConfig::from_json(text, &Overrides::default())
            .map_err(|e| Fail(DscStatus::Config, e.to_string()))?;
        let outputs =
            disclosure_core::cli::run(&cfg).map_err(|e| Fail(DscStatus::Config, e.to_string()))?;
        let body = outputs.render_report();
        status = match outputs.status.code() {
            0 => DscStatus::Ok,
            2 => DscStatus::Model,
            3 => DscStatus::Solver,
            _ => DscStatus::Config,
        };
        if let Some(msg) = outputs.report.get("error").and_then(|v| v.as_str()) {
            set_error(msg);
        }
        *report = CString::new(body).map_err(|e| Fail(DscStatus::Solver, e.to_string()))?.into_raw();
        Ok(())
    });
    if outer == DscStatus::Ok {
        status
    } else {
        outer
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
