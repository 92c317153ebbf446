//! C ABI for `sgl-core`.
//!
//! Every function returns an [`SglStatus`]. On failure a message is kept per
//! thread and can be read with [`sgl_last_error_message`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sgl_core::penalty::{epsilon_norm, lambda_solver};
use sgl_core::{
    lambda_max, solve, solve_path, DesignMatrix, Error, GroupPartition, PathConfig, PathResult, PenaltyParams, Problem,
    Rule, SolverConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SglStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// The solver stopped at `max_passes` above the requested gap. Outputs
    /// are still written.
    NotConverged = 4,
    Domain = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SglRule {
    None = 0,
    Static = 1,
    Dynamic = 2,
    Dst3 = 3,
    Gap = 4,
}

impl From<SglRule> for Rule {
    fn from(r: SglRule) -> Self {
        match r {
            SglRule::None => Rule::None,
            SglRule::Static => Rule::Static,
            SglRule::Dynamic => Rule::Dynamic,
            SglRule::Dst3 => Rule::Dst3,
            SglRule::Gap => Rule::Gap,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SglSolverOptions {
    pub tolerance: f64,
    pub max_passes: usize,
    pub gap_check_every: usize,
    pub rule: SglRule,
}

impl From<SglSolverOptions> for SolverConfig {
    fn from(o: SglSolverOptions) -> Self {
        SolverConfig {
            tolerance: o.tolerance,
            max_passes: o.max_passes,
            gap_check_every: o.gap_check_every,
            rule: o.rule.into(),
        }
    }
}

/// A design, response, group partition and penalty.
pub struct SglProblem {
    problem: Problem,
    partition: GroupPartition,
    penalty: PenaltyParams,
}

/// Solutions along a regularization path.
pub struct SglPath {
    result: PathResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SglStatus, msg: impl Into<String>) -> SglStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> SglStatus {
    let status = match e {
        Error::DimensionMismatch { .. } => SglStatus::DimensionMismatch,
        Error::Domain(_) => SglStatus::Domain,
        _ => SglStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SglStatus) -> SglStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SglStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else if len == 0 {
        Some(&[])
    } else {
        Some(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Option<&'a mut [f64]> {
    if p.is_null() {
        None
    } else if len == 0 {
        Some(&mut [])
    } else {
        Some(std::slice::from_raw_parts_mut(p, len))
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SglStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sgl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default options: gap tolerance 1e-8, 50000 passes, gap check every 10
/// passes, GAP screening.
#[no_mangle]
pub extern "C" fn sgl_solver_options_default() -> SglSolverOptions {
    let d = SolverConfig::default();
    SglSolverOptions {
        tolerance: d.tolerance,
        max_passes: d.max_passes,
        gap_check_every: d.gap_check_every,
        rule: SglRule::Gap,
    }
}

/// Builds a problem handle.
///
/// `x` is `n_samples × n_features` in column-major order, `y` has
/// `n_samples` entries and `group_ids[j]` is the group of feature `j`
/// (ids must cover `0..n_groups`). `weights` has `n_groups` entries, or is
/// null for `sqrt(group size)`.
///
/// # Safety
/// Pointers must be valid for the stated lengths. `out` receives a handle
/// owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn sgl_problem_new(
    x: *const f64,
    n_samples: usize,
    n_features: usize,
    y: *const f64,
    group_ids: *const usize,
    n_groups: usize,
    weights: *const f64,
    tau: f64,
    out: *mut *mut SglProblem,
) -> SglStatus {
    guard(|| {
        non_null!(x, y, group_ids, out);
        *out = ptr::null_mut();
        let Some(len) = n_samples.checked_mul(n_features) else {
            return fail(SglStatus::InvalidArgument, "n_samples * n_features overflows");
        };
        let xs = slice(x, len).unwrap().to_vec();
        let ys = slice(y, n_samples).unwrap().to_vec();
        let ids = if n_features == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(group_ids, n_features)
        };
        let mut groups = vec![Vec::new(); n_groups];
        for (j, &g) in ids.iter().enumerate() {
            if g >= n_groups {
                return fail(
                    SglStatus::OutOfRange,
                    format!("group id {g} of feature {j} is not below n_groups = {n_groups}"),
                );
            }
            groups[g].push(j);
        }
        let partition = match slice(weights, n_groups) {
            Some(w) => GroupPartition::new(groups, w.to_vec(), n_features),
            None => GroupPartition::with_sqrt_weights(groups, n_features),
        };
        let built = partition.and_then(|partition| {
            let design = DesignMatrix::from_col_major(n_samples, n_features, xs)?;
            let problem = Problem::new(design, ys, &partition)?;
            let penalty = PenaltyParams::for_partition(tau, &partition)?;
            Ok(SglProblem {
                problem,
                partition,
                penalty,
            })
        });
        match built {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                SglStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `handle` must come from [`sgl_problem_new`] and not be used afterwards.
/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn sgl_problem_free(handle: *mut SglProblem) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live problem handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn sgl_problem_dims(
    handle: *const SglProblem,
    n_samples: *mut usize,
    n_features: *mut usize,
    n_groups: *mut usize,
) -> SglStatus {
    guard(|| {
        non_null!(handle);
        let h = &*handle;
        if !n_samples.is_null() {
            *n_samples = h.problem.n_samples();
        }
        if !n_features.is_null() {
            *n_features = h.problem.n_features();
        }
        if !n_groups.is_null() {
            *n_groups = h.partition.n_groups();
        }
        SglStatus::Ok
    })
}

/// Smallest λ at which the zero vector is optimal.
///
/// # Safety
/// `handle` must be a live problem handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_problem_lambda_max(handle: *const SglProblem, out: *mut f64) -> SglStatus {
    guard(|| {
        non_null!(handle, out);
        let h = &*handle;
        *out = lambda_max(&h.problem, &h.penalty, &h.partition);
        SglStatus::Ok
    })
}

/// Solves at one λ. `init_beta` may be null for a cold start. `beta_out`
/// receives `n_features` coefficients and `gap_out` (nullable) the final
/// duality gap. Returns `NotConverged` when the gap target was missed.
///
/// # Safety
/// Pointers must be valid for `n_features` entries where applicable.
#[no_mangle]
pub unsafe extern "C" fn sgl_solve(
    handle: *const SglProblem,
    lambda: f64,
    init_beta: *const f64,
    options: *const SglSolverOptions,
    beta_out: *mut f64,
    gap_out: *mut f64,
) -> SglStatus {
    guard(|| {
        non_null!(handle, options, beta_out);
        let h = &*handle;
        let p = h.problem.n_features();
        let init = match slice(init_beta, p) {
            Some(s) => s.to_vec(),
            None => vec![0.0; p],
        };
        let config: SolverConfig = (*options).into();
        match solve(&h.problem, &h.penalty, &h.partition, lambda, &init, &config) {
            Ok(res) => {
                slice_mut(beta_out, p).unwrap().copy_from_slice(&res.beta);
                if !gap_out.is_null() {
                    *gap_out = res.final_gap.gap;
                }
                if res.converged {
                    SglStatus::Ok
                } else {
                    fail(
                        SglStatus::NotConverged,
                        format!(
                            "gap {:e} above tolerance after {} passes",
                            res.final_gap.gap, res.passes_used
                        ),
                    )
                }
            }
            Err(e) => from_core(e),
        }
    })
}

/// Solves on the grid `λ_max·10^(−δt/(T−1))`, `t = 0..T`, with warm starts.
/// The path handle is written even when some point did not converge, in
/// which case `NotConverged` is returned.
///
/// # Safety
/// `handle` must be live, `options` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_solve_path(
    handle: *const SglProblem,
    num_points: usize,
    delta: f64,
    options: *const SglSolverOptions,
    out: *mut *mut SglPath,
) -> SglStatus {
    guard(|| {
        non_null!(handle, options, out);
        *out = ptr::null_mut();
        let h = &*handle;
        let path = PathConfig {
            num_points,
            delta,
            explicit_lambdas: None,
        };
        let config: SolverConfig = (*options).into();
        match solve_path(&h.problem, &h.penalty, &h.partition, &path, &config) {
            Ok(result) => {
                let converged = result.all_converged();
                *out = Box::into_raw(Box::new(SglPath { result }));
                if converged {
                    SglStatus::Ok
                } else {
                    fail(
                        SglStatus::NotConverged,
                        "at least one path point missed the gap tolerance",
                    )
                }
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `path` must come from [`sgl_solve_path`] and not be used afterwards.
/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn sgl_path_free(path: *mut SglPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of grid points; 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live path handle.
#[no_mangle]
pub unsafe extern "C" fn sgl_path_len(path: *const SglPath) -> usize {
    if path.is_null() {
        0
    } else {
        (*path).result.results.len()
    }
}

unsafe fn path_point<'a>(path: *const SglPath, index: usize) -> Result<&'a sgl_core::SolveResult, SglStatus> {
    if path.is_null() {
        return Err(fail(SglStatus::NullPointer, "`path` is null"));
    }
    let results = &(*path).result.results;
    results.get(index).ok_or_else(|| {
        fail(
            SglStatus::OutOfRange,
            format!("index {index} out of range for a path of {} points", results.len()),
        )
    })
}

/// λ, final gap and convergence flag of point `index`. Out pointers may be
/// null.
///
/// # Safety
/// `path` must be a live path handle.
#[no_mangle]
pub unsafe extern "C" fn sgl_path_point(
    path: *const SglPath,
    index: usize,
    lambda_out: *mut f64,
    gap_out: *mut f64,
    converged_out: *mut bool,
) -> SglStatus {
    guard(|| match path_point(path, index) {
        Ok(r) => {
            if !lambda_out.is_null() {
                *lambda_out = r.lambda;
            }
            if !gap_out.is_null() {
                *gap_out = r.final_gap.gap;
            }
            if !converged_out.is_null() {
                *converged_out = r.converged;
            }
            SglStatus::Ok
        }
        Err(s) => s,
    })
}

/// Copies the coefficients of point `index` into `beta_out` (`len` must be
/// `n_features`).
///
/// # Safety
/// `beta_out` must be writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sgl_path_beta(
    path: *const SglPath,
    index: usize,
    beta_out: *mut f64,
    len: usize,
) -> SglStatus {
    guard(|| {
        non_null!(beta_out);
        match path_point(path, index) {
            Ok(r) if r.beta.len() != len => fail(
                SglStatus::DimensionMismatch,
                format!("beta has {} entries, buffer has {len}", r.beta.len()),
            ),
            Ok(r) => {
                slice_mut(beta_out, len).unwrap().copy_from_slice(&r.beta);
                SglStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// The ν ≥ 0 with `Σ (|x_i| − να)₊² = (νR)²`.
///
/// # Safety
/// `x` must be readable for `len` entries and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_lambda_solver(x: *const f64, len: usize, alpha: f64, r: f64, out: *mut f64) -> SglStatus {
    guard(|| {
        non_null!(x, out);
        if !(alpha >= 0.0 && r >= 0.0) {
            return fail(SglStatus::InvalidArgument, "alpha and r must be nonnegative");
        }
        *out = lambda_solver(slice(x, len).unwrap(), alpha, r);
        SglStatus::Ok
    })
}

/// ε-norm of `x` for ε in [0, 1].
///
/// # Safety
/// `x` must be readable for `len` entries and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_epsilon_norm(x: *const f64, len: usize, eps: f64, out: *mut f64) -> SglStatus {
    guard(|| {
        non_null!(x, out);
        if !(0.0..=1.0).contains(&eps) {
            return fail(SglStatus::InvalidArgument, format!("eps = {eps} is outside [0, 1]"));
        }
        *out = epsilon_norm(slice(x, len).unwrap(), eps);
        SglStatus::Ok
    })
}
