//! Ladder variables of Markov random walks with a finite driving chain.

// Index loops mirror the matrix formulas; `!(x > y)` comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod theory;
pub mod wiener_hopf;

pub use error::{Error, Result};
