//! Component-wise multiple-try Metropolis with adaptive Plateau proposals,
//! Gaussian-trial and random-walk baselines, convergence diagnostics and an
//! experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptation;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod mtm;
pub mod plateau;
pub mod sampler;
pub mod targets;

pub use error::{Error, Result};
