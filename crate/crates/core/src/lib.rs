#![no_std]
// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod simgen;

pub use error::{Error, Result};

/// Number of regression targets (the three resonant capacitances).
pub const LABELS: usize = 3;
