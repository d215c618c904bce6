//! Uncertainty-weighted consensus ADMM for regularized least-squares and
//! MAP estimation.
//!
//! The crate is organized bottom-up:
//!
//! * [`problem`]: model vectors, noise and prior specifications, consensus
//!   terms, misfit and regularizer evaluation;
//! * [`operators`]: forward operators, imaging test problems, partitioning
//!   and MatrixMarket I/O;
//! * [`solvers`]: PCG, Gauss–Newton, nonlinear CG and the Armijo linesearch;
//! * [`uq`]: low-rank posterior-variance estimates and the weights built
//!   from them;
//! * [`admm`]: synchronous weighted consensus ADMM;
//! * [`async_engine`]: the partial-barrier asynchronous variant;
//! * [`oracle`]: dense reference solutions for small problems.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod async_engine;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod problem;
pub mod random;
pub mod solvers;
pub mod uq;

pub use error::{Error, Result};
pub use operators::{ForwardOperator, GridImage, OperatorKind};
pub use problem::{
    ConsensusState, DiagonalWeight, ModelVector, NoiseCov, PriorKind, PriorSpec, Subproblem, W_CAP, W_FLOOR,
};
