//! CMA-ES with signal-to-noise-ratio based learning-rate adaptation.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] — symmetric eigendecomposition and SPD matrix functions;
//! * [`cma`] — the plain CMA-ES transition (sampling, ranking, proposal);
//! * [`lra`] — learning-rate adaptation wrapped around the proposal;
//! * [`objectives`] — benchmark functions, noise and rotations;
//! * [`harness`] — trial execution, metrics and CSV output;
//! * [`ode`] — the 1-D Rastrigin mean/variance dynamics demo.

pub mod cli;
pub mod cma;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lra;
pub mod objectives;
pub mod ode;
pub mod rng;

pub use error::{Error, Result};
