//! Nonlinear spectra of Finsler-Laplacians on discretized compact metric
//! measure manifolds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bakry_emery;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod fem;
pub mod measure;
pub mod mesh;
pub mod metric;
pub mod packing;
pub mod sparse;

pub use error::{Error, Result};
