//! Fixed-point solver for the optimal factorization program.
//!
//! The optimization problem is
//!
//! ```text
//!   minimize  tr(S^T S X^{-1})   over symmetric PD X with diag(X) <= 1,
//! ```
//!
//! whose unique minimizer has unit diagonal and is characterized by the
//! Lagrangian stationarity condition `S^T S = X diag(lambda) X` for a
//! strictly positive multiplier vector `lambda`. That vector is the
//! unique fixed point of the map
//!
//! ```text
//!   phi(v) = diagpart( sqrt( diag(v)^{1/2} S^T S diag(v)^{1/2} ) ),
//! ```
//!
//! and once `lambda` is found, the minimizer is the generalized square
//! root
//!
//! ```text
//!   X* = diag(lambda)^{-1/2} sqrt( diag(lambda)^{1/2} S^T S diag(lambda)^{1/2} ) diag(lambda)^{-1/2}.
//! ```
//!
//! This module iterates `phi` to a relative-norm tolerance, builds `X*`,
//! rescales its diagonal to exactly one, and certifies the result by the
//! stationarity residual. Iterating `phi` is observed to converge
//! quickly in practice but carries no proven rate, so the iteration cap
//! fails loudly with diagnostics instead of spinning.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{EigValsh, Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, clamp_eigenvalues, ensure_finite, ensure_square, fro_norm, symmetrize, ToleranceConfig};
use crate::loss::trace_loss;

/// Initial vector for the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    /// The all-ones vector. Deterministic; the default.
    Ones,
    /// Entries drawn uniformly from `[0.5, 1.5)` with a seeded generator.
    RandomPositive { seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative-norm stopping tolerance on `|phi(v) - v| / |v|`.
    pub rtol: f64,
    /// Iteration cap; exceeding it is an error carrying the last iterate.
    pub max_iter: usize,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-5,
            max_iter: 10_000,
            init: Init::Ones,
        }
    }
}

impl SolverConfig {
    pub fn with_rtol(rtol: f64) -> Self {
        SolverConfig {
            rtol,
            ..Default::default()
        }
    }
}

/// Converged output of [`solve`].
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    /// Fixed point of `phi`; the Lagrange multipliers. Strictly positive.
    pub lambda: Array1<f64>,
    /// The optimal Gram matrix, symmetric PD with unit diagonal.
    pub x_star: Array2<f64>,
    pub iterations: usize,
    /// `|phi(v) - v| / |v|` at the accepted step.
    pub fp_residual: f64,
    /// `|S^T S - X* diag(lambda) X*|_F / |S^T S|_F`.
    pub kkt_residual: f64,
    /// `tr(S^T S X*^{-1})`.
    pub loss: f64,
    /// Max `|X*[i,i] - 1|` observed before the final diagonal rescaling;
    /// diagnostic for the boundary-activity property.
    pub raw_diag_deviation: f64,
}

impl FixedPointResult {
    pub fn root_loss(&self) -> f64 {
        self.loss.sqrt()
    }
}

/// One application of the fixed-point map to a strictly positive vector.
pub fn phi(v: &Array1<f64>, s: &Array2<f64>) -> Result<Array1<f64>> {
    let n = ensure_square(&s.view())?;
    if v.len() != n {
        return Err(Error::dim(format!(
            "phi: v has length {}, s is {n}x{n}",
            v.len()
        )));
    }
    let mut gram = s.t().dot(s);
    symmetrize(&mut gram);
    phi_gram(v, &gram)
}

fn check_positive(v: &Array1<f64>) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::NonPositiveInput { index: i, value: x });
        }
    }
    Ok(())
}

/// `phi` with the Gram matrix `S^T S` precomputed.
fn phi_gram(v: &Array1<f64>, gram: &Array2<f64>) -> Result<Array1<f64>> {
    check_positive(v)?;
    let n = v.len();
    let d: Array1<f64> = v.mapv(f64::sqrt);
    let mut m = Array2::<f64>::zeros((n, n));
    scaled_gram_into(&mut m, gram, &d);
    let (mut vals, vecs) = m.eigh(UPLO::Lower)?;
    clamp_eigenvalues(&mut vals, ToleranceConfig::default().eig_clamp)?;
    Ok(diag_of_sqrt(&vals, &vecs))
}

/// Writes `diag(d) * gram * diag(d)` into `out`.
fn scaled_gram_into(out: &mut Array2<f64>, gram: &Array2<f64>, d: &Array1<f64>) {
    for ((i, j), o) in out.indexed_iter_mut() {
        *o = d[i] * gram[(i, j)] * d[j];
    }
}

/// `diagpart(sqrt(M))` from the eigendecomposition of `M`:
/// entry `i` is `sum_j sqrt(w_j) V[i,j]^2`.
fn diag_of_sqrt(vals: &Array1<f64>, vecs: &Array2<f64>) -> Array1<f64> {
    let roots = vals.mapv(f64::sqrt);
    let mut out = Array1::<f64>::zeros(vals.len());
    for (i, row) in vecs.axis_iter(Axis(0)).enumerate() {
        out[i] = row
            .iter()
            .zip(roots.iter())
            .map(|(&vij, &r)| r * vij * vij)
            .sum();
    }
    out
}

/// Stationarity residual `|S^T S - X diag(lambda) X|_F / |S^T S|_F`.
pub fn kkt_residual(s: &Array2<f64>, x: &Array2<f64>, lambda: &Array1<f64>) -> Result<f64> {
    let n = ensure_square(&s.view())?;
    if x.dim() != (n, n) || lambda.len() != n {
        return Err(Error::dim(format!(
            "kkt_residual: s is {n}x{n}, x is {}x{}, lambda has length {}",
            x.nrows(),
            x.ncols(),
            lambda.len()
        )));
    }
    let mut gram = s.t().dot(s);
    symmetrize(&mut gram);
    Ok(kkt_residual_gram(&gram, x, lambda))
}

fn kkt_residual_gram(gram: &Array2<f64>, x: &Array2<f64>, lambda: &Array1<f64>) -> f64 {
    // X diag(lambda): scale columns of X
    let mut xl = x.clone();
    for (mut col, &l) in xl.axis_iter_mut(Axis(1)).zip(lambda.iter()) {
        col.mapv_inplace(|v| v * l);
    }
    let reconstructed = xl.dot(x);
    let diff = gram - &reconstructed;
    fro_norm(&diff) / fro_norm(gram)
}

fn initial_vector(n: usize, init: Init) -> Array1<f64> {
    match init {
        Init::Ones => Array1::ones(n),
        Init::RandomPositive { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Array1::from_shape_fn(n, |_| rng.gen_range(0.5..1.5))
        }
    }
}

/// Solve the factorization program for a square full-rank `s`.
pub fn solve(s: &Array2<f64>, cfg: &SolverConfig) -> Result<FixedPointResult> {
    let n = ensure_square(&s.view())?;
    ensure_finite(&s.view())?;
    let mut gram = s.t().dot(s);
    symmetrize(&mut gram);

    // Full-rank check: smallest singular value of s above rcond * largest.
    let eigs = gram.eigvalsh(UPLO::Lower)?;
    let lam_min = eigs[0];
    let lam_max = eigs[n - 1];
    let rcond = n as f64 * f64::EPSILON;
    if !(lam_min > rcond * rcond * lam_max) {
        return Err(Error::SingularS);
    }

    let mut v = initial_vector(n, cfg.init);
    let mut fp_residual;
    let mut iterations = 0usize;
    loop {
        let nv = phi_gram(&v, &gram)?;
        let dv = &nv - &v;
        fp_residual = dv.iter().map(|x| x * x).sum::<f64>().sqrt()
            / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = nv;
        iterations += 1;
        if fp_residual < cfg.rtol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: fp_residual,
                last: v.to_vec(),
            });
        }
    }
    let lambda = v;

    // X* = diag(lambda)^{-1/2} sqrt(diag(lambda)^{1/2} G diag(lambda)^{1/2}) diag(lambda)^{-1/2}
    let d = lambda.mapv(f64::sqrt);
    let mut m = Array2::<f64>::zeros((n, n));
    scaled_gram_into(&mut m, &gram, &d);
    let (mut vals, vecs) = m.eigh(UPLO::Lower)?;
    clamp_eigenvalues(&mut vals, ToleranceConfig::default().eig_clamp)?;
    let mut scaled = vecs.clone();
    for (mut col, &w) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let r = w.sqrt();
        col.mapv_inplace(|x| x * r);
    }
    let mut x_star = scaled.dot(&vecs.t());
    for ((i, j), e) in x_star.indexed_iter_mut() {
        *e /= d[i] * d[j];
    }
    symmetrize(&mut x_star);

    // Float drift leaves the diagonal near one; rescale it to exactly one,
    // which preserves positive definiteness.
    let diag: Array1<f64> = x_star.diag().to_owned();
    let raw_diag_deviation = diag.iter().fold(0.0f64, |m, &x| m.max((x - 1.0).abs()));
    let sqrt_diag = diag.mapv(f64::sqrt);
    for ((i, j), e) in x_star.indexed_iter_mut() {
        *e /= sqrt_diag[i] * sqrt_diag[j];
    }
    for i in 0..n {
        x_star[(i, i)] = 1.0;
    }

    let kkt = kkt_residual_gram(&gram, &x_star, &lambda);
    let loss = trace_loss(s, &x_star)?;

    Ok(FixedPointResult {
        lambda,
        x_star,
        iterations,
        fp_residual,
        kkt_residual: kkt,
        loss,
        raw_diag_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::prefix_sum_matrix;
    use ndarray::array;

    #[test]
    fn phi_fixes_ones_for_identity() {
        let n = 5;
        let s = Array2::<f64>::eye(n);
        let v = Array1::<f64>::ones(n);
        let out = phi(&v, &s).unwrap();
        for &x in out.iter() {
            assert!((x - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_scalar_fixed_point() {
        // n = 1, s = [c]: v = c^2 is the fixed point
        let c: f64 = 3.0;
        let s = array![[c]];
        let v = array![c * c];
        let out = phi(&v, &s).unwrap();
        assert!((out[0] - c * c).abs() <= 1e-12);
    }

    #[test]
    fn phi_positive_on_prefix_sum() {
        let s = prefix_sum_matrix(4);
        let v = Array1::ones(4);
        let out = phi(&v, &s).unwrap();
        assert!(out.iter().all(|&x| x > 0.0));
        // independent oracle: full psd_sqrt, then take the diagonal
        let gram = s.t().dot(&s);
        let r = crate::linalg::psd_sqrt(&gram).unwrap();
        for i in 0..4 {
            assert!((out[i] - r[(i, i)]).abs() <= 1e-10);
        }
    }

    #[test]
    fn phi_rejects_nonpositive() {
        let s = prefix_sum_matrix(3);
        let v = array![1.0, 0.0, 1.0];
        assert!(matches!(
            phi(&v, &s),
            Err(Error::NonPositiveInput { index: 1, .. })
        ));
    }

    #[test]
    fn solve_identity() {
        let n = 6;
        let s = Array2::<f64>::eye(n);
        let r = solve(&s, &SolverConfig::default()).unwrap();
        for &l in r.lambda.iter() {
            assert!((l - 1.0).abs() <= 1e-10);
        }
        assert!(linalg::rel_fro_dist(&r.x_star, &s) <= 1e-10);
        assert!((r.loss - n as f64).abs() / n as f64 <= 1e-10);
    }

    #[test]
    fn solve_n2_matches_golden_ratio() {
        // The 2x2 problem reduces to a single correlation parameter and
        // its minimal loss is the square of the golden ratio.
        let s = prefix_sum_matrix(2);
        let r = solve(&s, &SolverConfig::with_rtol(1e-10)).unwrap();
        let expected = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((r.root_loss() - expected).abs() / expected <= 1e-8);
    }

    #[test]
    fn solve_rejects_singular() {
        let s = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            solve(&s, &SolverConfig::default()),
            Err(Error::SingularS)
        ));
    }

    #[test]
    fn solve_reports_low_residuals_small_n() {
        let s = prefix_sum_matrix(16);
        let r = solve(&s, &SolverConfig::default()).unwrap();
        assert!(r.fp_residual <= 1e-5);
        assert!(r.kkt_residual <= 1e-4);
        assert!(r.raw_diag_deviation <= 1e-6);
        assert!(r.lambda.iter().all(|&l| l > 0.0));
        for i in 0..16 {
            assert_eq!(r.x_star[(i, i)], 1.0);
        }
    }

    #[test]
    fn kkt_residual_zero_for_identity_triple() {
        let n = 4;
        let s = Array2::<f64>::eye(n);
        let x = Array2::<f64>::eye(n);
        let lambda = Array1::<f64>::ones(n);
        assert!(kkt_residual(&s, &x, &lambda).unwrap() <= 1e-15);
    }

    #[test]
    fn kkt_residual_positive_for_suboptimal_point() {
        let s = prefix_sum_matrix(4);
        let x = Array2::<f64>::eye(4);
        let lambda = Array1::<f64>::ones(4);
        assert!(kkt_residual(&s, &x, &lambda).unwrap() > 0.1);
    }

    #[test]
    fn no_convergence_carries_last_iterate() {
        let s = prefix_sum_matrix(8);
        let cfg = SolverConfig {
            rtol: 1e-12,
            max_iter: 2,
            init: Init::Ones,
        };
        match solve(&s, &cfg) {
            Err(Error::NoConvergence {
                iterations,
                residual,
                last,
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
                assert_eq!(last.len(), 8);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn random_inits_agree_with_ones() {
        let s = prefix_sum_matrix(16);
        let base = solve(&s, &SolverConfig::default()).unwrap();
        for seed in 0..3u64 {
            let cfg = SolverConfig {
                init: Init::RandomPositive { seed },
                ..Default::default()
            };
            let r = solve(&s, &cfg).unwrap();
            let diff = (&r.lambda - &base.lambda)
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            let norm = base.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(diff / norm <= 10.0 * 1e-5);
        }
    }
}
