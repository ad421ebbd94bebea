//! Boundary-integral solvers for the 3D Brinkman system and the semilinear
//! Darcy–Forchheimer–Brinkman system.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod potentials;
pub mod semilinear;
pub mod solvers;

pub use error::{BbemError, Result};
