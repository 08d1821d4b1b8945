//! Mean/variance dynamics of a 1-D Gaussian on the Rastrigin function in the
//! vanishing learning-rate limit, and their Euler discretization.

use std::f64::consts::PI;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub m: f64,
    pub v: f64,
    pub step: u64,
}

impl OdeState {
    pub fn new(m: f64, v: f64) -> Self {
        OdeState { m, v, step: 0 }
    }
}

/// `(dm/dt, dv/dt)` at `(m, v)`.
pub fn rastrigin_ode_rhs(m: f64, v: f64) -> (f64, f64) {
    let damp = (-2.0 * PI * PI * v).exp();
    let dm = -2.0 * m * v - 20.0 * PI * v * (2.0 * PI * m).sin() * damp;
    let dv = -2.0 * v * v - 40.0 * PI * PI * v * v * (2.0 * PI * m).cos() * damp;
    (dm, dv)
}

#[derive(Debug, Clone)]
pub struct EulerOptions {
    pub eta: f64,
    pub max_steps: u64,
    /// Keep every `stride`-th state (the initial and final states are always kept).
    pub stride: u64,
    /// Stop once `max(|dm/dt|, |dv/dt|)` falls below this.
    pub stop_tol: f64,
}

impl EulerOptions {
    pub fn new(eta: f64, max_steps: u64) -> Self {
        EulerOptions {
            eta,
            max_steps,
            stride: 1000,
            stop_tol: 1e-12,
        }
    }
}

impl Default for EulerOptions {
    fn default() -> Self {
        EulerOptions::new(1e-3, 10_000_000)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<OdeState>,
    pub last: OdeState,
    /// Set when the variance became nonpositive; `states` holds the prefix.
    pub degenerate: Option<Error>,
}

pub fn euler_integrate(init: OdeState, opts: &EulerOptions) -> Trajectory {
    assert!(opts.eta > 0.0, "learning rate must be positive");
    let stride = opts.stride.max(1);
    let mut states = vec![init];
    let mut cur = init;
    let mut degenerate = None;
    while cur.step < opts.max_steps {
        let (dm, dv) = rastrigin_ode_rhs(cur.m, cur.v);
        if dm.abs().max(dv.abs()) < opts.stop_tol {
            break;
        }
        let next = OdeState {
            m: cur.m + opts.eta * dm,
            v: cur.v + opts.eta * dv,
            step: cur.step + 1,
        };
        if next.v.is_nan() || next.v <= 0.0 {
            degenerate = Some(Error::DegenerateVariance {
                step: next.step,
                v: next.v,
            });
            break;
        }
        cur = next;
        if cur.step.is_multiple_of(stride) {
            states.push(cur);
        }
    }
    if states.last() != Some(&cur) {
        states.push(cur);
    }
    Trajectory {
        states,
        last: cur,
        degenerate,
    }
}

pub fn ode_file_name(eta: f64, m0: f64, v0: f64) -> String {
    format!("ode_eta{eta:e}_m{m0}_v{v0}.csv")
}
