//! Variational tools for discrete p-Laplacian boundary value and homoclinic problems.

// NaN must fail validation, so `!(x > 0.0)` is the intended form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod certifier;
pub mod error;
pub mod homoclinic;
pub mod lattice;
pub mod nonlinearity;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
