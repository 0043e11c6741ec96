//! Tree-aggregation baselines as matrix factorizations.
//!
//! All three use the binary-tree encoder `M_k` over `n = 2^(k-1)` leaves
//! and differ only in the decoder `W` with `W M_k = S`:
//!
//! * `vanilla`: 0/1 decoding — row `t` sums the maximal disjoint nodes
//!   covering leaves `1..t` (the nodes in the binary expansion of `t`);
//! * `honaker_full`: the minimum-variance unbiased decoder `S M_k^+`,
//!   which reads nodes above and below and is therefore not streaming;
//! * `honaker_below`: per row, the minimum-norm decoder restricted to
//!   nodes whose leaf range lies entirely in the past — the optimal
//!   streaming decoder for the tree encoder.
//!
//! The estimation-from-below weights have a closed recursive form. The
//! available nodes for the prefix `1..t` split into the disjoint
//! complete subtrees rooted at the binary-expansion nodes of `t`, so the
//! minimum-norm problem decouples per subtree, and within a complete
//! subtree of height `h` the optimal root estimate combines the root
//! measurement with the two child estimates by inverse-variance
//! weighting:
//!
//! ```text
//!   var[0] = 1,    var[h] = 1 / (1 + 1/(2 var[h-1])),
//! ```
//!
//! giving a weight per depth. Row norms, and hence the loss, follow as
//! `|w_t|^2 = sum of var[h] over the expansion nodes of t`. The rows
//! assembled this way agree with the per-row pseudoinverse definition to
//! machine precision (checked in tests against the SVD route).

use ndarray::{Array1, Array2};

use crate::error::Result;
use crate::loss::{loss_of, optimal_w, LossReport};
use crate::operators::{prefix_sum_matrix, tree_matrix, TreeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    Vanilla,
    HonakerFull,
    HonakerBelow,
}

/// A decoder for the binary-tree encoder, as a factorization of the
/// prefix-sum operator.
#[derive(Debug, Clone)]
pub struct TreeFactorization {
    pub kind: TreeKind,
    /// Decoder of shape `n x (2n - 1)`.
    pub w: Array2<f64>,
    /// The tree encoder; `h()` is its matrix.
    pub tree: TreeMatrix,
    /// Leaf count `2^(k-1)`.
    pub n: usize,
}

impl TreeFactorization {
    pub fn h(&self) -> &Array2<f64> {
        &self.tree.matrix
    }

    pub fn loss(&self) -> Result<LossReport> {
        loss_of(&self.w, self.h())
    }
}

/// Per-height variance of the estimation-from-below root estimate with
/// unit node noise; `heights` entries for heights `0..heights-1`.
fn below_variances(heights: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(heights);
    v.push(1.0);
    for h in 1..heights {
        v.push(1.0 / (1.0 + 1.0 / (2.0 * v[h - 1])));
    }
    v
}

/// Per-depth node weights of the estimation-from-below root estimate in a
/// complete subtree of height `h`: `weights[h][depth]`.
fn below_depth_weights(heights: usize) -> Vec<Vec<f64>> {
    let v = below_variances(heights);
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(heights);
    u.push(vec![1.0]);
    for h in 1..heights {
        let mut row = Vec::with_capacity(h + 1);
        row.push(v[h]);
        let child_factor = v[h] / (2.0 * v[h - 1]);
        for j in 1..=h {
            row.push(child_factor * u[h - 1][j - 1]);
        }
        u.push(row);
    }
    u
}

/// Binary-expansion decomposition of the prefix `1..=t` into disjoint
/// aligned blocks, yielding `(leaf_offset, height)` per block in leaf order.
fn expansion_blocks(t: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut offset = 0usize;
    let mut rem = t;
    while rem > 0 {
        let h = usize::BITS as usize - 1 - rem.leading_zeros() as usize;
        blocks.push((offset, h));
        offset += 1 << h;
        rem -= 1 << h;
    }
    blocks
}

/// Vanilla 0/1 tree decoding: row `t` selects the binary-expansion nodes.
pub fn vanilla_w(k: usize) -> TreeFactorization {
    let tree = tree_matrix(k);
    let n = tree.leaves();
    let mut w = Array2::<f64>::zeros((n, tree.nodes()));
    let index = range_index(&tree);
    for t in 1..=n {
        for (offset, h) in expansion_blocks(t) {
            let node = index[&(offset, offset + (1 << h) - 1)];
            w[(t - 1, node)] = 1.0;
        }
    }
    TreeFactorization {
        kind: TreeKind::Vanilla,
        w,
        tree,
        n,
    }
}

/// Honaker fully-efficient decoder `S M_k^+`; the minimum-loss decoder
/// for the tree encoder, not streaming.
pub fn honaker_full(k: usize) -> Result<TreeFactorization> {
    let tree = tree_matrix(k);
    let n = tree.leaves();
    let s = prefix_sum_matrix(n);
    let w = optimal_w(&s, &tree.matrix)?;
    Ok(TreeFactorization {
        kind: TreeKind::HonakerFull,
        w,
        tree,
        n,
    })
}

/// Honaker estimation-from-below: per row the minimum-norm decoder over
/// the nodes fully contained in the past; the optimal streaming decoder
/// for the tree encoder.
pub fn honaker_below(k: usize) -> TreeFactorization {
    let tree = tree_matrix(k);
    let n = tree.leaves();
    let weights = below_depth_weights(k);
    let mut w = Array2::<f64>::zeros((n, tree.nodes()));
    for t in 1..=n {
        for (offset, h) in expansion_blocks(t) {
            let lo = offset;
            let hi = offset + (1 << h) - 1;
            for (r, &(a, b)) in tree.node_leaf_ranges.iter().enumerate() {
                if a >= lo && b <= hi {
                    let depth = h - tree.node_height(r);
                    w[(t - 1, r)] = weights[h][depth];
                }
            }
        }
    }
    TreeFactorization {
        kind: TreeKind::HonakerBelow,
        w,
        tree,
        n,
    }
}

/// Squared row norms of the estimation-from-below decoder, computed from
/// the closed form without materializing the decoder. Index `t-1` holds
/// `|w_t|^2`.
pub fn honaker_below_row_norms_sq(k: usize) -> Array1<f64> {
    let n = 1usize << (k - 1);
    let v = below_variances(k);
    Array1::from_shape_fn(n, |i| {
        expansion_blocks(i + 1)
            .iter()
            .map(|&(_, h)| v[h])
            .sum::<f64>()
    })
}

/// Loss of the estimation-from-below factorization, from the closed form.
pub fn honaker_below_loss(k: usize) -> LossReport {
    let gamma = (k as f64).sqrt();
    let frob_w_sq = honaker_below_row_norms_sq(k).sum();
    LossReport::from_parts(gamma, frob_w_sq)
}

/// Per-step release variance `sigma^2 * |w[t, :]|^2`.
pub fn per_step_variance(w: &Array2<f64>, sigma: f64) -> Array1<f64> {
    assert!(sigma > 0.0, "per_step_variance requires sigma > 0");
    let s2 = sigma * sigma;
    Array1::from_iter(
        w.rows()
            .into_iter()
            .map(|r| s2 * r.iter().map(|v| v * v).sum::<f64>()),
    )
}

fn range_index(tree: &TreeMatrix) -> std::collections::HashMap<(usize, usize), usize> {
    tree.node_leaf_ranges
        .iter()
        .enumerate()
        .map(|(r, &range)| (range, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, pinv, rel_fro_dist};
    use crate::operators::is_streaming_pair;
    use ndarray::array;

    #[test]
    fn vanilla_k2_matches_hand_matrix() {
        let f = vanilla_w(2);
        assert_eq!(f.w, array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let s = prefix_sum_matrix(2);
        assert!(rel_fro_dist(&f.w.dot(f.h()), &s) <= 1e-12);
    }

    #[test]
    fn vanilla_row_support_sizes() {
        for k in 2..=6 {
            let f = vanilla_w(k);
            let n = f.n;
            // full prefix: single nonzero (the root)
            let root_row: usize = (0..f.tree.nodes())
                .filter(|&j| f.w[(n - 1, j)] != 0.0)
                .count();
            assert_eq!(root_row, 1);
            // t = n - 1 has all-ones binary expansion: k - 1 nonzeros
            let penultimate: usize = (0..f.tree.nodes())
                .filter(|&j| f.w[(n - 2, j)] != 0.0)
                .count();
            assert_eq!(penultimate, k - 1);
            // every row t has popcount(t) nonzeros and reproduces S
            for t in 1..=n {
                let nz = (0..f.tree.nodes()).filter(|&j| f.w[(t - 1, j)] != 0.0).count();
                assert_eq!(nz, t.count_ones() as usize);
            }
            let s = prefix_sum_matrix(n);
            assert!(rel_fro_dist(&f.w.dot(f.h()), &s) <= 1e-12);
            assert!(is_streaming_pair(&f.w, f.h()).unwrap());
        }
    }

    #[test]
    fn honaker_full_k1_is_identity() {
        let f = honaker_full(1).unwrap();
        assert!(rel_fro_dist(&f.w, &array![[1.0]]) <= 1e-12);
    }

    #[test]
    fn honaker_full_beats_vanilla_and_reproduces_s() {
        let f = honaker_full(3).unwrap();
        let v = vanilla_w(3);
        let wf: f64 = f.w.iter().map(|x| x * x).sum();
        let wv: f64 = v.w.iter().map(|x| x * x).sum();
        assert!(wf < wv);
        let s = prefix_sum_matrix(4);
        assert!(rel_fro_dist(&f.w.dot(f.h()), &s) <= 1e-10);
    }

    #[test]
    fn honaker_full_minimal_under_null_space_perturbations() {
        let k = 4;
        let f = honaker_full(k).unwrap();
        let base = fro_norm(&f.w);
        // null-space directions of M_k^T: parent minus its two children
        let tree = &f.tree;
        let parents: Vec<(usize, usize, usize)> = (0..tree.nodes())
            .filter(|&r| tree.node_height(r) > 0)
            .map(|r| {
                let (a, b) = tree.node_leaf_ranges[r];
                let mid = (a + b) / 2;
                let left = tree
                    .node_leaf_ranges
                    .iter()
                    .position(|&(x, y)| x == a && y == mid)
                    .unwrap();
                let right = tree
                    .node_leaf_ranges
                    .iter()
                    .position(|&(x, y)| x == mid + 1 && y == b)
                    .unwrap();
                (r, left, right)
            })
            .collect();
        let n = f.n;
        for trial in 0..20 {
            let mut delta = Array2::<f64>::zeros((n, tree.nodes()));
            for (idx, &(p, l, r)) in parents.iter().enumerate() {
                let row = (trial + idx) % n;
                let c = ((trial * 31 + idx * 7) % 13) as f64 / 13.0 - 0.5;
                delta[(row, p)] += c;
                delta[(row, l)] -= c;
                delta[(row, r)] -= c;
            }
            assert!(fro_norm(&delta.dot(&tree.matrix)) <= 1e-10);
            let perturbed = &f.w + &delta;
            assert!(fro_norm(&perturbed) >= base - 1e-10);
        }
    }

    #[test]
    fn honaker_below_first_row_single_leaf() {
        let f = honaker_below(2);
        assert!(rel_fro_dist(
            &f.w.row(0).to_owned().insert_axis(ndarray::Axis(0)),
            &array![[1.0, 0.0, 0.0]]
        ) <= 1e-12);
    }

    #[test]
    fn honaker_below_streaming_and_exact() {
        for k in 2..=6 {
            let f = honaker_below(k);
            let s = prefix_sum_matrix(f.n);
            assert!(rel_fro_dist(&f.w.dot(f.h()), &s) <= 1e-9);
            assert!(is_streaming_pair(&f.w, f.h()).unwrap());
        }
    }

    #[test]
    fn honaker_below_rows_match_pinv_oracle() {
        // independent route: restrict the encoder to available nodes and
        // take the minimum-norm row through the SVD pseudoinverse
        let k = 4;
        let f = honaker_below(k);
        let n = f.n;
        for t in 1..=n {
            let avail: Vec<usize> = (0..f.tree.nodes())
                .filter(|&r| f.tree.node_leaf_ranges[r].1 <= t - 1)
                .collect();
            let sub = Array2::from_shape_fn((avail.len(), n), |(i, c)| {
                f.tree.matrix[(avail[i], c)]
            });
            let target = Array2::from_shape_fn((1, n), |(_, c)| if c < t { 1.0 } else { 0.0 });
            let row = target.dot(&pinv(&sub).unwrap());
            for (i, &node) in avail.iter().enumerate() {
                assert!(
                    (row[(0, i)] - f.w[(t - 1, node)]).abs() <= 1e-10,
                    "t={t} node={node}"
                );
            }
            // nodes outside the available set carry no weight
            for r in 0..f.tree.nodes() {
                if !avail.contains(&r) {
                    assert_eq!(f.w[(t - 1, r)], 0.0);
                }
            }
        }
    }

    #[test]
    fn below_variance_dips_at_powers_of_two() {
        let k = 5;
        let norms = honaker_below_row_norms_sq(k);
        for i in 1..(k - 1) {
            let t = 1usize << i;
            assert!(
                norms[t - 1] < norms[t - 2],
                "variance at t=2^{i} should dip below t=2^{i}-1"
            );
        }
    }

    #[test]
    fn closed_form_matches_materialized() {
        for k in 2..=8 {
            let f = honaker_below(k);
            let direct = f.loss().unwrap();
            let closed = honaker_below_loss(k);
            assert!((direct.loss - closed.loss).abs() / closed.loss <= 1e-12);
            let norms = honaker_below_row_norms_sq(k);
            for (t, row) in f.w.rows().into_iter().enumerate() {
                let rn: f64 = row.iter().map(|v| v * v).sum();
                assert!((rn - norms[t]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn loss_ordering_full_below_vanilla() {
        for k in 2..=6 {
            let lf = honaker_full(k).unwrap().loss().unwrap();
            let lb = honaker_below(k).loss().unwrap();
            let lv = vanilla_w(k).loss().unwrap();
            let gamma = (k as f64).sqrt();
            for l in [&lf, &lb, &lv] {
                assert!((l.gamma - gamma).abs() <= 1e-12);
            }
            assert!(lf.loss <= lb.loss * (1.0 + 1e-12));
            assert!(lb.loss <= lv.loss * (1.0 + 1e-12));
        }
    }

    #[test]
    fn per_step_variance_identity() {
        let w = Array2::<f64>::eye(4);
        let v = per_step_variance(&w, 1.0);
        assert!(v.iter().all(|&x| (x - 1.0).abs() <= 1e-15));
        let v2 = per_step_variance(&w, 2.0);
        assert!(v2.iter().all(|&x| (x - 4.0).abs() <= 1e-15));
    }
}
