//! Residual minimization for the p-Laplacian with P1 trial and
//! Crouzeix–Raviart test functions.
//!
//! The discrete problem seeks a P1 function `u` with prescribed boundary
//! values and a Crouzeix–Raviart residual representative `r` such that
//! `J(r) + A(u) = F` on the test space and `B(u)ᵀ r = 0` on the trial
//! space. It is solved by damped Newton steps with continuation in `p`;
//! `η = ‖r‖^{p-1}` serves as error estimator and drives adaptive
//! newest-vertex bisection.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::result_large_err)]

pub mod config;
pub mod driver;
pub mod error;
pub mod estimate;
pub mod forms;
pub mod linsolve;
pub mod mesh;
pub mod newton;
pub mod quadrature;
pub mod spaces;
pub mod sparse;
pub mod telemetry;

pub use error::{Error, Result};
