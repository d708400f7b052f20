//! Finite-element laboratory for eigenvalues of the Laplacian on domains
//! with a small hole.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod eigensolve;
pub mod fem;
pub mod geometry;
pub mod lab;
pub mod output;
pub mod smalleig;

pub use error::{Error, Result};
