//! Expected squared reconstruction error of a privatized factorization,
//! and the optimal decoder for a fixed encoder.
//!
//! For a factorization `S = W H` released as `W (H x + z)` with
//! `z ~ N(0, sigma^2 I)` calibrated to the sensitivity of `H`, the
//! expected total squared error at a fixed privacy level is
//! `Gamma^2 * |W|_F^2`, where `Gamma` is the maximum l2 column norm of
//! `H`. The decoder minimizing this for fixed `H` is `S H^+`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, fro_norm, max_column_norm, pinv, rel_fro_dist};

/// Loss of a factorization pair at matched privacy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossReport {
    /// Sensitivity: max l2 column norm of the encoder `H`.
    pub gamma: f64,
    /// Squared Frobenius norm of the decoder `W`.
    pub frob_w_sq: f64,
    /// `gamma^2 * frob_w_sq`.
    pub loss: f64,
    pub root_loss: f64,
}

impl LossReport {
    pub fn from_parts(gamma: f64, frob_w_sq: f64) -> Self {
        let loss = gamma * gamma * frob_w_sq;
        LossReport {
            gamma,
            frob_w_sq,
            loss,
            root_loss: loss.sqrt(),
        }
    }
}

/// Loss of the pair `(w, h)`.
pub fn loss_of(w: &Array2<f64>, h: &Array2<f64>) -> Result<LossReport> {
    if w.ncols() != h.nrows() {
        return Err(Error::dim(format!(
            "loss_of: w has {} cols, h has {} rows",
            w.ncols(),
            h.nrows()
        )));
    }
    let gamma = max_column_norm(h);
    let frob_w_sq = w.iter().map(|v| v * v).sum::<f64>();
    Ok(LossReport::from_parts(gamma, frob_w_sq))
}

/// Relative residual above which `optimal_w` treats `W H = S` as infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// The minimum-Frobenius-norm decoder `W = S H^+` for a fixed encoder.
pub fn optimal_w(s: &Array2<f64>, h: &Array2<f64>) -> Result<Array2<f64>> {
    if s.ncols() != h.ncols() {
        return Err(Error::dim(format!(
            "optimal_w: s is {}x{}, h is {}x{}",
            s.nrows(),
            s.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let w = s.dot(&pinv(h)?);
    let residual = rel_fro_dist(&w.dot(h), s);
    if residual > FEASIBILITY_TOL {
        return Err(Error::InfeasibleFactorization { residual });
    }
    Ok(w)
}

/// `tr(S^T S X^{-1})` for symmetric positive-definite `X`, computed via a
/// Cholesky solve rather than an explicit inverse: with `X = L L^T`,
/// `tr(S^T S X^{-1}) = |L^{-1} S^T|_F^2`.
pub fn trace_loss(s: &Array2<f64>, x: &Array2<f64>) -> Result<f64> {
    if s.dim() != x.dim() {
        return Err(Error::dim(format!(
            "trace_loss: s is {}x{}, x is {}x{}",
            s.nrows(),
            s.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let l = cholesky(x)?;
    let st = s.t().to_owned();
    let y = linalg::tri_solve_lower(&l, &st)?;
    Ok(fro_norm(&y).powi(2))
}
