//! Streaming (lower-triangular) factorizations.
//!
//! A factorization `S = W H` supports online release when row `t` of the
//! output only combines measurements computable from inputs `1..t`. For
//! square matrices it suffices that both factors are lower-triangular.
//! Two tools live here:
//!
//! * the map `psi(X) = P CholeskyFactor(P X P^T)^T P^T` (with `P` the
//!   antidiagonal involution), which extracts the unique lower-triangular
//!   `H` with nonnegative diagonal satisfying `H^T H = X` — applying it
//!   to the optimal Gram matrix turns the unconstrained optimum into a
//!   streaming factorization at no cost in loss;
//! * a rotation-based reduction taking any online factorization, square
//!   or not, to a square lower-triangular one with identical loss.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, rel_fro_dist, tri_solve_upper};
use crate::loss::{loss_of, LossReport};
use crate::operators::{is_streaming_pair, STREAMING_ZERO_TOL};
use crate::solver::FixedPointResult;

/// A lower-triangular factorization `s = w * h`.
#[derive(Debug, Clone)]
pub struct StreamingFactorization {
    pub s: Array2<f64>,
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl StreamingFactorization {
    pub fn loss(&self) -> Result<LossReport> {
        loss_of(&self.w, &self.h)
    }
}

/// The unique lower-triangular square root factor: returns lower-triangular
/// `H` with `H^T H = x` and nonnegative diagonal.
///
/// A plain Cholesky factorization of `x` puts the lower-triangular factor
/// on the wrong side of the product; conjugating by the antidiagonal
/// involution fixes that. The conjugation is realized as index reversal
/// rather than matrix multiplication.
pub fn psi(x: &Array2<f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    // P x P^T reverses both axes
    let reversed = Array2::from_shape_fn((n, n), |(i, j)| x[(n - 1 - i, n - 1 - j)]);
    let l = cholesky(&reversed)?;
    // P L^T P^T: H[i, j] = L[n-1-j, n-1-i], lower-triangular by construction
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        l[(n - 1 - j, n - 1 - i)]
    }))
}

/// Convert a solver result for lower-triangular `s` into the streaming
/// factorization `(S H^{-1}, H)` with `H = psi(X*)`.
///
/// `H` is invertible because `X*` is positive definite, so `W` is
/// recovered by a triangular solve.
pub fn factorize_streaming(
    s: &Array2<f64>,
    result: &FixedPointResult,
) -> Result<StreamingFactorization> {
    let h = psi(&result.x_star)?;
    let ht = h.t().to_owned();
    let wt = tri_solve_upper(&ht, &s.t().to_owned())?;
    let w = wt.t().to_owned();
    Ok(StreamingFactorization {
        s: s.clone(),
        w,
        h,
    })
}

/// Residual tolerance for accepting the input factorization.
const FACTORIZATION_TOL: f64 = 1e-8;

/// Reduce an online factorization with `d >= n` measurements to a square
/// lower-triangular one with the same loss.
///
/// Working through output rows in order, any two measurements still
/// unassigned to an earlier row that both carry weight in the current row
/// are merged by a plane rotation of the corresponding `W` columns and
/// `H` rows. A rotation preserves `W H`, every column norm of `H`, and
/// the Frobenius norm of `W`, while zeroing one of the two coefficients.
/// When one measurement per row remains, the rows of `H` receiving no
/// weight anywhere are discarded.
pub fn reduce_to_square(
    w: &Array2<f64>,
    h: &Array2<f64>,
    s: &Array2<f64>,
) -> Result<StreamingFactorization> {
    let (n, d) = w.dim();
    if h.nrows() != d || h.ncols() != n || s.dim() != (n, n) {
        return Err(Error::dim(format!(
            "reduce_to_square: w is {n}x{d}, h is {}x{}, s is {}x{}",
            h.nrows(),
            h.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let residual = rel_fro_dist(&w.dot(h), s);
    if residual > FACTORIZATION_TOL {
        return Err(Error::NonFactorization { residual });
    }
    if !is_streaming_pair(w, h)? {
        let (row, measurement) = first_streaming_violation(w, h);
        return Err(Error::NotOnline { row, measurement });
    }

    let mut w = w.clone();
    let mut h = h.clone();
    let mut assigned: Vec<bool> = vec![false; d];
    let mut order: Vec<usize> = Vec::with_capacity(n);

    for t in 0..n {
        loop {
            let active: Vec<usize> = (0..d)
                .filter(|&j| !assigned[j] && w[(t, j)].abs() > STREAMING_ZERO_TOL)
                .collect();
            match active.len() {
                0 | 1 => {
                    if let Some(&j) = active.first() {
                        assigned[j] = true;
                        order.push(j);
                    }
                    break;
                }
                _ => {
                    // lowest-index pair first; the result is order-independent
                    rotate_pair(&mut w, &mut h, t, active[0], active[1]);
                }
            }
        }
    }

    if order.len() != n {
        // A full-rank lower-triangular target leaves exactly one live
        // measurement per row; anything else means the input was not a
        // factorization of s to working precision.
        return Err(Error::NonFactorization { residual });
    }

    let mut w_sq = Array2::<f64>::zeros((n, n));
    let mut h_sq = Array2::<f64>::zeros((n, n));
    for (new_j, &old_j) in order.iter().enumerate() {
        for t in new_j..n {
            w_sq[(t, new_j)] = w[(t, old_j)];
        }
        for c in 0..=new_j.min(n - 1) {
            h_sq[(new_j, c)] = h[(old_j, c)];
        }
    }
    Ok(StreamingFactorization {
        s: s.clone(),
        w: w_sq,
        h: h_sq,
    })
}

fn first_streaming_violation(w: &Array2<f64>, h: &Array2<f64>) -> (usize, usize) {
    let (n, d) = w.dim();
    for t in 0..n {
        for j in 0..d {
            if w[(t, j)].abs() > STREAMING_ZERO_TOL
                && ((t + 1)..n).any(|c| h[(j, c)] != 0.0)
            {
                return (t, j);
            }
        }
    }
    (0, 0)
}

/// Plane rotation merging measurement `jb` into `ja` at row `t`:
/// zeroes `w[t, jb]` while preserving the product `W H`, all column norms
/// of `H`, and the Frobenius norm of `W`.
pub(crate) fn rotate_pair(w: &mut Array2<f64>, h: &mut Array2<f64>, t: usize, ja: usize, jb: usize) {
    let alpha = w[(t, ja)];
    let beta = w[(t, jb)];
    let z = alpha.hypot(beta);
    debug_assert!(z > 0.0);
    let theta1 = alpha / z;
    let theta2 = beta / z;
    let n = w.nrows();
    for r in t..n {
        let a = w[(r, ja)];
        let b = w[(r, jb)];
        w[(r, ja)] = theta1 * a + theta2 * b;
        w[(r, jb)] = -theta2 * a + theta1 * b;
    }
    w[(t, jb)] = 0.0; // exact by construction of the rotation
    let cols = h.ncols();
    for c in 0..cols {
        let a = h[(ja, c)];
        let b = h[(jb, c)];
        h[(ja, c)] = theta1 * a + theta2 * b;
        h[(jb, c)] = -theta2 * a + theta1 * b;
    }
}
