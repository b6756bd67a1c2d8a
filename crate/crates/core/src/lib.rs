//! Luxemburg norms on variable-exponent spaces over tensor grids, the first
//! eigenpair of the p(x)-Laplacian, and stability experiments for sequences of
//! exponents.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod discretize;
pub mod error;
pub mod exponent_field;
pub mod io;
pub mod mesh;
pub mod modular_norm;
pub mod rayleigh_solver;
pub mod stability_lab;

pub use error::{Error, Result};
