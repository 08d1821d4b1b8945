//! C interface to the learning-rate-adapted CMA-ES.
//!
//! The optimizer is exposed as an opaque handle driven by an ask/tell loop:
//!
//! ```c
//! LraOptions opts = lra_options_default();
//! LraOptimizer *opt = NULL;
//! lra_optimizer_new(dim, x0, sigma0, &opts, &opt);
//! size_t lambda = lra_optimizer_lambda(opt);
//! while (...) {
//!     lra_optimizer_ask(opt, xs, lambda * dim);   // row-major, one candidate per row
//!     for (i = 0; i < lambda; i++) fs[i] = f(xs + i * dim);
//!     lra_optimizer_tell(opt, fs, lambda);
//! }
//! lra_optimizer_free(opt);
//! ```
//!
//! Every fallible function returns an [`LraStatus`]; on failure a message is
//! kept per thread and can be read with [`lra_last_error_message`]. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DVector;

use lra_cmaes::cma::{
    default_params, sample_population, CmaParams, CmaState, Population, RankedPopulation, SearchDistribution,
};
use lra_cmaes::linalg::{spd_roots, SpdRoots};
use lra_cmaes::lra::{lra_update, LearningRate, LraHyperParams, LraState};
use lra_cmaes::objectives::Function;
use lra_cmaes::ode::{euler_integrate, EulerOptions, OdeState};
use lra_cmaes::rng::{stream_rng, StreamRng, StreamRole};
use lra_cmaes::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// `tell` without a pending `ask`, or a buffer of the wrong length.
    WrongState = 3,
    /// An objective value was NaN.
    ObjectiveNan = 4,
    /// The search distribution degenerated; the handle keeps its last valid state.
    Numerical = 5,
    Panic = 6,
}

/// Construction options; obtain defaults from [`lra_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LraOptions {
    /// Population size; 0 selects `4 + floor(3 ln d)`.
    pub lambda: usize,
    /// Nonzero: adapt the learning rates. Zero: keep `eta_m`, `eta_sigma` fixed.
    pub adaptive: i32,
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub alpha: f64,
    pub beta_m: f64,
    pub beta_sigma: f64,
    pub gamma: f64,
    pub seed: u64,
}

/// Opaque optimizer state.
pub struct LraOptimizer {
    dist: SearchDistribution,
    params: CmaParams,
    cma_state: CmaState,
    mode: LearningRate,
    lra_state: LraState,
    roots: SpdRoots,
    rng: StreamRng,
    pending: Option<Population>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: LraStatus, msg: impl Into<String>) -> LraStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> LraStatus {
    match err.root() {
        Error::ObjectiveNaN { .. } => LraStatus::ObjectiveNan,
        Error::InvalidConfig(_) | Error::InvalidInput(_) => LraStatus::InvalidArgument,
        _ => LraStatus::Numerical,
    }
}

fn guarded(f: impl FnOnce() -> LraStatus) -> LraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LraStatus::Panic, "internal panic"),
    }
}

#[no_mangle]
pub extern "C" fn lra_options_default() -> LraOptions {
    let hp = LraHyperParams::default();
    LraOptions {
        lambda: 0,
        adaptive: 1,
        eta_m: 1.0,
        eta_sigma: 1.0,
        alpha: hp.alpha,
        beta_m: hp.beta_m,
        beta_sigma: hp.beta_sigma,
        gamma: hp.gamma,
        seed: 0,
    }
}

fn build(dim: usize, mean: &[f64], sigma: f64, opts: &LraOptions) -> Result<LraOptimizer, Error> {
    let lambda = (opts.lambda != 0).then_some(opts.lambda);
    let params = default_params(dim, lambda)?;
    let mode = if opts.adaptive != 0 {
        LearningRate::Adaptive(LraHyperParams {
            alpha: opts.alpha,
            beta_m: opts.beta_m,
            beta_sigma: opts.beta_sigma,
            gamma: opts.gamma,
        })
    } else {
        LearningRate::Fixed {
            eta_m: opts.eta_m,
            eta_sigma: opts.eta_sigma,
        }
    };
    mode.validate()?;
    let dist = SearchDistribution::new(DVector::from_column_slice(mean), sigma)?;
    let roots = spd_roots(&dist.cov)?;
    Ok(LraOptimizer {
        lra_state: LraState::for_mode(dim, &mode),
        cma_state: CmaState::new(dim),
        rng: stream_rng(opts.seed, 0, StreamRole::Sampling),
        dist,
        params,
        mode,
        roots,
        pending: None,
    })
}

/// Creates an optimizer with initial mean `mean[0..dim]`, step-size `sigma`
/// and identity covariance. `opts` may be null for defaults.
///
/// # Safety
/// `mean` must point to `dim` readable doubles, `opts` must be null or valid,
/// and `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_new(
    dim: usize,
    mean: *const f64,
    sigma: f64,
    opts: *const LraOptions,
    out: *mut *mut LraOptimizer,
) -> LraStatus {
    guarded(|| {
        if mean.is_null() || out.is_null() {
            return fail(LraStatus::NullPointer, "mean and out must not be null");
        }
        if dim == 0 {
            return fail(LraStatus::InvalidArgument, "dim must be positive");
        }
        let opts = if opts.is_null() { lra_options_default() } else { *opts };
        let mean = slice::from_raw_parts(mean, dim);
        match build(dim, mean, sigma, &opts) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(o));
                LraStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `opt` must be null or a handle from [`lra_optimizer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_free(opt: *mut LraOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Samples a new population into `out` (`lambda * dim` doubles, row-major).
/// Asking again before `tell` discards the previous population.
///
/// # Safety
/// `opt` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_ask(opt: *mut LraOptimizer, out: *mut f64, len: usize) -> LraStatus {
    guarded(|| {
        let Some(o) = opt.as_mut() else {
            return fail(LraStatus::NullPointer, "null optimizer");
        };
        if out.is_null() {
            return fail(LraStatus::NullPointer, "null output buffer");
        }
        let d = o.dist.dim();
        if len != o.params.lambda * d {
            return fail(
                LraStatus::WrongState,
                format!(
                    "buffer holds {len} values, expected lambda*dim = {}",
                    o.params.lambda * d
                ),
            );
        }
        let pop = sample_population(&o.dist, &o.params, &o.roots.sqrt, None, &mut o.rng);
        let out = slice::from_raw_parts_mut(out, len);
        for (row, x) in out.chunks_mut(d).zip(&pop.x) {
            row.copy_from_slice(x.as_slice());
        }
        o.pending = Some(pop);
        LraStatus::Ok
    })
}

/// Reports objective values for the last asked population, in ask order.
///
/// # Safety
/// `opt` must be a live handle and `f` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_tell(opt: *mut LraOptimizer, f: *const f64, len: usize) -> LraStatus {
    guarded(|| {
        let Some(o) = opt.as_mut() else {
            return fail(LraStatus::NullPointer, "null optimizer");
        };
        if f.is_null() {
            return fail(LraStatus::NullPointer, "null values");
        }
        if len != o.params.lambda {
            return fail(
                LraStatus::WrongState,
                format!("got {len} values, expected lambda = {}", o.params.lambda),
            );
        }
        let Some(pop) = o.pending.take() else {
            return fail(LraStatus::WrongState, "tell called without a pending ask");
        };
        let values = slice::from_raw_parts(f, len).to_vec();
        let result = RankedPopulation::new(pop, values).and_then(|ranked| {
            lra_update(
                &o.dist,
                &o.params,
                &o.cma_state,
                &o.mode,
                &o.lra_state,
                &o.roots,
                &ranked,
            )
        });
        match result {
            Ok(it) => {
                o.dist = it.dist;
                o.cma_state = it.cma_state;
                o.lra_state = it.lra_state;
                o.roots = it.roots;
                LraStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Copies the current mean into `out` (`dim` doubles).
///
/// # Safety
/// `opt` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_mean(opt: *const LraOptimizer, out: *mut f64, len: usize) -> LraStatus {
    guarded(|| {
        let Some(o) = opt.as_ref() else {
            return fail(LraStatus::NullPointer, "null optimizer");
        };
        if out.is_null() {
            return fail(LraStatus::NullPointer, "null output buffer");
        }
        if len != o.dist.dim() {
            return fail(
                LraStatus::WrongState,
                format!("buffer holds {len} values, expected {}", o.dist.dim()),
            );
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(o.dist.mean.as_slice());
        LraStatus::Ok
    })
}

/// Current learning rates for the mean and the covariance.
///
/// # Safety
/// `opt` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_eta(
    opt: *const LraOptimizer,
    eta_m: *mut f64,
    eta_sigma: *mut f64,
) -> LraStatus {
    guarded(|| {
        let Some(o) = opt.as_ref() else {
            return fail(LraStatus::NullPointer, "null optimizer");
        };
        if eta_m.is_null() || eta_sigma.is_null() {
            return fail(LraStatus::NullPointer, "null output pointer");
        }
        *eta_m = o.lra_state.eta_m;
        *eta_sigma = o.lra_state.eta_sigma;
        LraStatus::Ok
    })
}

/// Step-size; NaN for a null handle.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_sigma(opt: *const LraOptimizer) -> f64 {
    opt.as_ref().map_or(f64::NAN, |o| o.dist.sigma)
}

/// Population size; 0 for a null handle.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_lambda(opt: *const LraOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.params.lambda)
}

/// Search-space dimension; 0 for a null handle.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_dim(opt: *const LraOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.dist.dim())
}

/// Completed iterations; 0 for a null handle.
///
/// # Safety
/// `opt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lra_optimizer_iteration(opt: *const LraOptimizer) -> u64 {
    opt.as_ref().map_or(0, |o| o.cma_state.t)
}

/// Noiseless value of a named benchmark function (e.g. `"rastrigin"`).
///
/// # Safety
/// `name` must be a NUL-terminated string, `x` must point to `dim` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lra_objective_evaluate(
    name: *const c_char,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> LraStatus {
    guarded(|| {
        if name.is_null() || x.is_null() || out.is_null() {
            return fail(LraStatus::NullPointer, "null argument");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(LraStatus::InvalidArgument, "objective name is not UTF-8");
        };
        let f = match Function::from_name(name) {
            Ok(f) => f,
            Err(e) => return fail(LraStatus::InvalidArgument, e.to_string()),
        };
        if dim < f.min_dim() {
            return fail(
                LraStatus::InvalidArgument,
                format!("{name} needs dim >= {}", f.min_dim()),
            );
        }
        *out = f.value(slice::from_raw_parts(x, dim));
        LraStatus::Ok
    })
}

/// Euler-integrates the 1-D Rastrigin mean/variance dynamics for at most
/// `steps` steps and writes the final state. Returns `Numerical` (with the
/// last valid state written) if the variance became nonpositive.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lra_ode_euler(
    m0: f64,
    v0: f64,
    eta: f64,
    steps: u64,
    m_out: *mut f64,
    v_out: *mut f64,
    steps_out: *mut u64,
) -> LraStatus {
    guarded(|| {
        if m_out.is_null() || v_out.is_null() || steps_out.is_null() {
            return fail(LraStatus::NullPointer, "null output pointer");
        }
        if !(eta.is_finite() && eta > 0.0 && v0.is_finite() && v0 > 0.0 && m0.is_finite()) {
            return fail(LraStatus::InvalidArgument, "eta and v0 must be positive and finite");
        }
        let opts = EulerOptions {
            stride: u64::MAX,
            ..EulerOptions::new(eta, steps)
        };
        let tr = euler_integrate(OdeState::new(m0, v0), &opts);
        *m_out = tr.last.m;
        *v_out = tr.last.v;
        *steps_out = tr.last.step;
        match tr.degenerate {
            Some(e) => fail(LraStatus::Numerical, e.to_string()),
            None => LraStatus::Ok,
        }
    })
}

/// Copies the calling thread's last error message (NUL-terminated, truncated
/// to fit) into `buf` and returns the full message length in bytes.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lra_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn lra_status_string(status: LraStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LraStatus::Ok => c"ok",
        LraStatus::NullPointer => c"null pointer",
        LraStatus::InvalidArgument => c"invalid argument",
        LraStatus::WrongState => c"wrong state or buffer size",
        LraStatus::ObjectiveNan => c"objective value is NaN",
        LraStatus::Numerical => c"numerical failure",
        LraStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
