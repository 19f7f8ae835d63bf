//! Minimum graph bisection as a QUBO: graph generation, matrix construction,
//! penalty selection, solvers, a gradient-boosted penalty predictor and an
//! experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gbr;
pub mod graph;
pub mod harness;
pub mod penalty;
pub mod qubo;
pub mod rng;
pub mod solvers;
pub mod timing;

pub use error::{MbpError, Result};
