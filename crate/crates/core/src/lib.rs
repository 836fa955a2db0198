//! Operator-splitting finite-element solvers for semilinear, Monge-Ampère and
//! Pucci equations on 2-D triangulations.

pub mod error;
pub mod fem;
pub mod harness;
pub mod hessian;
pub mod mesh;
pub mod problems;
pub mod splitting;

pub use error::{Error, Result};
