//! Discretization, solvers and verification tools for the Choquard equation
//!
//! ```text
//! -Δu + V(x) u = (I_α ∗ |u|^p) |u|^{p-2} u   in R^N
//! ```
//!
//! posed on a cell-centred Cartesian box `[-L, L]^N` with homogeneous
//! Dirichlet data at the box faces.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod functional;
pub mod grid;
pub mod quadrature;
pub mod riesz;
pub mod solvers;

mod conv;

pub use error::{Error, Result};
pub use functional::{NodalCoefficients, NodalPair, Potential, Problem};
pub use grid::{Grid, ScalarField};
pub use riesz::{RieszKernel, SingularCell};
pub use solvers::{SolveReport, SolveStatus, SolverOptions};
