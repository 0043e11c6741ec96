//! Constructors for the named operators: the prefix-sum matrix `S`, the
//! binary-tree measurement matrices `M_k`, the antidiagonal involution
//! `P`, and the streaming-pair predicate.
//!
//! The tree matrix `M_k` is built recursively: `M_1 = [1]`, and `M_k`
//! duplicates `M_{k-1}` on the block diagonal and appends one all-ones
//! row. Its rows correspond to the nodes of a complete binary tree over
//! `2^(k-1)` leaves, in the order: left-subtree nodes, right-subtree
//! nodes, parent. That order is fixed here so each row's leaf range is
//! computable during the recursion.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Entries of `w` smaller than this in absolute value are treated as
/// zero by [`is_streaming_pair`]; optimal decoders are computed
/// numerically and carry rounding noise in structurally-zero positions.
pub const STREAMING_ZERO_TOL: f64 = 1e-12;

/// The n-by-n lower-triangular all-ones matrix mapping a vector to its
/// running sums.
pub fn prefix_sum_matrix(n: usize) -> Array2<f64> {
    assert!(n >= 1, "prefix_sum_matrix requires n >= 1");
    Array2::from_shape_fn((n, n), |(i, j)| if j <= i { 1.0 } else { 0.0 })
}

/// Binary-tree measurement matrix together with per-node leaf ranges.
#[derive(Debug, Clone)]
pub struct TreeMatrix {
    /// Level count; the tree covers `2^(k-1)` leaves with `2^k - 1` nodes.
    pub k: usize,
    /// The 0/1 measurement matrix of shape `(2^k - 1, 2^(k-1))`.
    pub matrix: Array2<f64>,
    /// Inclusive (first, last) leaf indices covered by each node row.
    pub node_leaf_ranges: Vec<(usize, usize)>,
}

impl TreeMatrix {
    /// Number of leaves, `2^(k-1)`.
    pub fn leaves(&self) -> usize {
        self.matrix.ncols()
    }

    /// Number of nodes, `2^k - 1`.
    pub fn nodes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Height of the subtree rooted at node `r`: 0 for a leaf node.
    pub fn node_height(&self, r: usize) -> usize {
        let (lo, hi) = self.node_leaf_ranges[r];
        (hi - lo + 1).trailing_zeros() as usize
    }
}

/// Build the complete binary-tree matrix with `k` levels.
pub fn tree_matrix(k: usize) -> TreeMatrix {
    assert!(k >= 1, "tree_matrix requires k >= 1");
    let mut ranges: Vec<(usize, usize)> = vec![(0, 0)];
    for level in 2..=k {
        let leaves = 1usize << (level - 2);
        let mut next = Vec::with_capacity(2 * ranges.len() + 1);
        next.extend(ranges.iter().copied());
        next.extend(ranges.iter().map(|&(a, b)| (a + leaves, b + leaves)));
        next.push((0, 2 * leaves - 1));
        ranges = next;
    }
    let leaves = 1usize << (k - 1);
    let nodes = (1usize << k) - 1;
    let mut matrix = Array2::<f64>::zeros((nodes, leaves));
    for (r, &(a, b)) in ranges.iter().enumerate() {
        for c in a..=b {
            matrix[(r, c)] = 1.0;
        }
    }
    TreeMatrix {
        k,
        matrix,
        node_leaf_ranges: ranges,
    }
}

/// Permutation matrix with ones on the antidiagonal; an involution.
pub fn antidiagonal(n: usize) -> Array2<f64> {
    assert!(n >= 1, "antidiagonal requires n >= 1");
    Array2::from_shape_fn((n, n), |(i, j)| if j == n - 1 - i { 1.0 } else { 0.0 })
}

/// Whether `(w, h)` is a valid streaming (online) pair.
///
/// Measurement `j` is released at the step of its last nonzero column in
/// `h`; the pair is streaming when every output step `t` only combines
/// measurements already released, i.e. `|w[t, j]| > tol` implies
/// `h[j, t'] = 0` for all `t' > t`.
pub fn is_streaming_pair(w: &Array2<f64>, h: &Array2<f64>) -> Result<bool> {
    let (n, d) = w.dim();
    if h.nrows() != d || h.ncols() != n {
        return Err(Error::dim(format!(
            "streaming pair: w is {n}x{d}, h is {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    // last nonzero column of each measurement row (release step)
    let release: Vec<Option<usize>> = (0..d)
        .map(|j| (0..n).rev().find(|&c| h[(j, c)] != 0.0))
        .collect();
    for t in 0..n {
        for j in 0..d {
            if w[(t, j)].abs() > STREAMING_ZERO_TOL {
                if let Some(r) = release[j] {
                    if r > t {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
