//! Local minimax complexity of one-dimensional stochastic convex optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`convex_fn`]: the convex function catalog, min-norm subgradients, the
//!   error metric and the pair dissimilarities `d` and `kappa`.
//! - [`oracle`]: a budgeted, seeded Gaussian first-order oracle.
//! - [`modulus`]: the computational modulus of continuity, conjugate
//!   subdifferentials and growth-based bounds.
//! - [`algorithms`]: sign-testing binary search and projected SGD.
//! - [`experiments`]: Monte-Carlo risk tables, slope fits, the two-point
//!   floor and the superefficiency construction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod convex_fn;
pub mod error;
pub mod experiments;
pub mod modulus;
pub mod oracle;
pub mod stats;

pub use convex_fn::{ConvexFunction1D, FunctionSpec, GrowthProfile, Interval};
pub use error::{Error, Result};
pub use oracle::{OracleConfig, OracleSession};
