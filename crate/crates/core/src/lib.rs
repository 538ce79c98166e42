//! Sampling and reconstruction of signals that lie on (or near) a union of
//! linear subspaces.
//!
//! The crate is organised around the recovery problem `y = Φx + e`:
//!
//! - [`linalg`]: vectors, the measurement-operator contract and shared numerics.
//! - [`models`]: union-of-subspaces constraint sets and their projections.
//! - [`operators`]: random ensembles, matrix sensing and spectral mixing.
//! - [`solver`]: the iterative projection algorithm and its guarantees.
//! - [`analysis`]: bi-Lipschitz constants, optimality oracles and
//!   sample-complexity calculators.
//!
//! Trial-level work (Monte-Carlo sampling, support enumeration) runs on
//! rayon when the `parallel` feature is enabled and sequentially otherwise;
//! see [`parallel`].

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod parallel;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{
    operator_norm_sq, real_inner, residual, DenseOperator, Field, LinearOperator,
    MeasurementVector, PowerEstimate, Scalar, SignalVector,
};
pub use models::UnionModel;
pub use nalgebra::{Complex, DMatrix, DVector};
pub use parallel::ExecMode;
pub use solver::{ipa_run, ipa_step, IpaConfig, IpaResult, StopReason};

pub type Complex64 = Complex<f64>;
