//! Optimal matrix factorizations of linear query operators for
//! differentially private release.
//!
//! The release mechanism is `W (H x + z)` for a factorization `S = W H`
//! of the query operator and Gaussian noise `z`; its expected total
//! squared error at fixed privacy is `Gamma^2 |W|_F^2` with `Gamma` the
//! maximum column norm of `H`. This crate computes the factorization
//! minimizing that loss — including under the streaming constraint that
//! release `t` may depend only on inputs `1..t` — along with
//! tree-aggregation baselines, efficient structured approximations of
//! the optimal decoder, privacy calibration, and spectral lower bounds.
//!
//! Entry points:
//!
//! * [`solver::solve`] — the fixed-point solver for the optimal Gram
//!   matrix of any square full-rank operator;
//! * [`streaming::factorize_streaming`] — lower-triangular factors from
//!   a solver result;
//! * [`tree`] — vanilla and Honaker binary-tree baselines;
//! * [`structured`] — banded-plus-low-rank decoder approximation and the
//!   constant-time-per-step noise stream;
//! * [`mechanism`] — noise calibration and end-to-end private release;
//! * [`bounds`] — closed-form prefix-sum spectrum and loss lower bounds.

pub mod bounds;
pub mod error;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod mechanism;
pub mod operators;
pub mod solver;
pub mod streaming;
pub mod structured;
pub mod tree;

pub use error::{Error, Result};
