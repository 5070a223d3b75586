//! Turnpike analysis for linear-quadratic tracking problems.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decay;
pub mod dichotomy;
pub mod error;
pub mod horizon;
pub mod linalg;
pub mod nonlinear;
pub mod periodic;
pub mod riccati;
pub mod signal;
pub mod steady;
pub mod zoo;

pub use error::{Result, TurnpikeError};
