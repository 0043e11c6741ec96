//! Dense linear-algebra kernels the rest of the crate builds on.
//!
//! Matrices are plain [`ndarray::Array2<f64>`] in row-major layout and
//! vectors are [`ndarray::Array1<f64>`]; there is no wrapper type. The
//! factorizations (Cholesky, symmetric eigendecomposition, SVD) are
//! delegated to LAPACK through `ndarray-linalg`, with validation and
//! error mapping handled here so callers see one error vocabulary.
//!
//! All functions are pure: inputs are taken by reference and never
//! mutated, so values can be shared freely across threads.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Eigh, JobSvd, SVDDC, UPLO};

use crate::error::{Error, Result};

/// Numerical tolerances used by the kernels in this module.
#[derive(Debug, Clone, Copy)]
pub struct ToleranceConfig {
    /// Relative symmetry tolerance: `max |a - a^T|` may not exceed
    /// `sym_tol * max |a|`.
    pub sym_tol: f64,
    /// Relative eigenvalue clamp threshold for the PSD square root.
    /// Eigenvalues in `[-eig_clamp * max_eig, 0)` are clamped to zero;
    /// anything below that is an error.
    pub eig_clamp: f64,
    /// Pseudoinverse cutoff factor: singular values below
    /// `rcond * sigma_max` are treated as zero. `None` means
    /// `rows * f64::EPSILON`.
    pub rcond: Option<f64>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            sym_tol: 1e-10,
            eig_clamp: 1e-12,
            rcond: None,
        }
    }
}

pub(crate) fn ensure_finite(a: &ArrayView2<'_, f64>) -> Result<()> {
    for ((i, j), &v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NotFinite { row: i, col: j });
        }
    }
    Ok(())
}

pub(crate) fn ensure_square(a: &ArrayView2<'_, f64>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    Ok(r)
}

fn ensure_symmetric(a: &ArrayView2<'_, f64>, sym_tol: f64) -> Result<()> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if dev > sym_tol * scale {
        return Err(Error::NotSymmetric {
            deviation: dev / scale,
            tol: sym_tol,
        });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Returns the lower-triangular `L` with `L * L^T = a`. Entries above the
/// diagonal of the result are exactly zero.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let v = a.view();
    ensure_square(&v)?;
    ensure_finite(&v)?;
    ensure_symmetric(&v, ToleranceConfig::default().sym_tol)?;
    match a.cholesky(UPLO::Lower) {
        Ok(l) => Ok(l),
        Err(ndarray_linalg::error::LinalgError::Lapack(
            lax::error::Error::LapackComputationalFailure { return_code },
        )) => Err(Error::NotPositiveDefinite {
            minor: return_code as usize,
        }),
        Err(e) => Err(Error::Backend(e)),
    }
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Returns the symmetric `R` with `R * R = a` and nonnegative eigenvalues.
/// Slightly negative eigenvalues (down to `-eig_clamp * max_eig`) are
/// clamped to zero; anything more negative is rejected as not PSD.
pub fn psd_sqrt(a: &Array2<f64>) -> Result<Array2<f64>> {
    psd_sqrt_with(a, &ToleranceConfig::default())
}

pub fn psd_sqrt_with(a: &Array2<f64>, tol: &ToleranceConfig) -> Result<Array2<f64>> {
    let v = a.view();
    ensure_square(&v)?;
    ensure_finite(&v)?;
    ensure_symmetric(&v, tol.sym_tol)?;
    let (mut vals, vecs) = a.eigh(UPLO::Lower)?;
    clamp_eigenvalues(&mut vals, tol.eig_clamp)?;
    // R = V diag(sqrt(vals)) V^T
    let mut scaled = vecs.clone();
    for (mut col, &w) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let s = w.sqrt();
        col.mapv_inplace(|x| x * s);
    }
    let mut r = scaled.dot(&vecs.t());
    symmetrize(&mut r);
    Ok(r)
}

pub(crate) fn clamp_eigenvalues(vals: &mut Array1<f64>, eig_clamp: f64) -> Result<()> {
    let max_eig = vals.iter().fold(0.0f64, |m, &w| m.max(w));
    let threshold = eig_clamp * max_eig;
    for w in vals.iter_mut() {
        if *w < -threshold {
            return Err(Error::NotPsd {
                eigenvalue: *w,
                threshold,
            });
        }
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    Ok(())
}

pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values below `rcond * sigma_max` are treated as zero, with
/// `rcond` defaulting to `rows * f64::EPSILON`.
pub fn pinv(a: &Array2<f64>) -> Result<Array2<f64>> {
    pinv_with(a, &ToleranceConfig::default())
}

pub fn pinv_with(a: &Array2<f64>, tol: &ToleranceConfig) -> Result<Array2<f64>> {
    let v = a.view();
    ensure_finite(&v)?;
    let (m, n) = a.dim();
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.expect("JobSvd::Some returns U");
    let vt = vt.expect("JobSvd::Some returns V^T");
    let rcond = tol.rcond.unwrap_or(m as f64 * f64::EPSILON);
    let cutoff = rcond * s.iter().cloned().fold(0.0f64, f64::max);
    // A^+ = V diag(1/s) U^T over singular values above the cutoff.
    let mut out = Array2::<f64>::zeros((n, m));
    for (idx, &sv) in s.iter().enumerate() {
        if sv > cutoff {
            let vi = vt.row(idx);
            let ui = u.column(idx);
            let inv = 1.0 / sv;
            for j in 0..n {
                let vij = vi[j] * inv;
                for i in 0..m {
                    out[(j, i)] += vij * ui[i];
                }
            }
        }
    }
    Ok(out)
}

/// Singular values of an arbitrary matrix, descending.
pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    let (_, s, _) = a.svddc(JobSvd::None)?;
    Ok(s)
}

/// Solve `l * X = b` by forward substitution for lower-triangular `l`.
///
/// Only the lower triangle of `l` is read.
pub fn tri_solve_lower(l: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = ensure_square(&l.view())?;
    if b.nrows() != n {
        return Err(Error::dim(format!(
            "triangular solve: l is {n}x{n} but b has {} rows",
            b.nrows()
        )));
    }
    check_diagonal_nonzero(l)?;
    let m = b.ncols();
    let mut x = b.clone();
    for i in 0..n {
        let inv = 1.0 / l[(i, i)];
        for k in 0..m {
            let mut acc = x[(i, k)];
            for j in 0..i {
                acc -= l[(i, j)] * x[(j, k)];
            }
            x[(i, k)] = acc * inv;
        }
    }
    Ok(x)
}

/// Solve `u * X = b` by back substitution for upper-triangular `u`.
pub fn tri_solve_upper(u: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = ensure_square(&u.view())?;
    if b.nrows() != n {
        return Err(Error::dim(format!(
            "triangular solve: u is {n}x{n} but b has {} rows",
            b.nrows()
        )));
    }
    check_diagonal_nonzero(u)?;
    let m = b.ncols();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let inv = 1.0 / u[(i, i)];
        for k in 0..m {
            let mut acc = x[(i, k)];
            for j in (i + 1)..n {
                acc -= u[(i, j)] * x[(j, k)];
            }
            x[(i, k)] = acc * inv;
        }
    }
    Ok(x)
}

fn check_diagonal_nonzero(a: &Array2<f64>) -> Result<()> {
    for (i, &d) in a.diag().iter().enumerate() {
        if d == 0.0 {
            return Err(Error::SingularMatrix { index: i });
        }
    }
    Ok(())
}

/// Maximum l2 column norm of a matrix. This is the sensitivity Gamma of
/// the map `x -> H x` under single-entry adjacency.
pub fn max_column_norm(h: &Array2<f64>) -> f64 {
    h.axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative Frobenius distance `|a - b|_F / |b|_F` (absolute when `b = 0`).
pub fn rel_fro_dist(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let denom = fro_norm(b);
    let diff = a - b;
    let num = fro_norm(&diff);
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}
