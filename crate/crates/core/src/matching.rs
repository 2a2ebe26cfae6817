//! Maximum-score one-to-one assignment between prediction and ground-truth
//! sets.
//!
//! Greedy pairing in descending-score order is not optimal for the
//! three-valued match score: a prediction can claim the one ground truth
//! that another prediction also fits, stranding the second prediction even
//! though a different pairing scores both. The one-to-one policy therefore
//! uses an exact maximum-weight assignment (Kuhn–Munkres with potentials,
//! O(n^3)), which the test suite checks against an exhaustive enumeration
//! oracle on small instances.

use crate::scalar::Scalar;

/// Exact maximum-total-score one-to-one assignment.
///
/// `scores` is a rectangular row-major matrix (`scores[row][col]`) of
/// non-negative weights. Returns the chosen `(row, col)` pairs with strictly
/// positive score, sorted by row index. Leaving a row or column unassigned
/// is always allowed and never worse than pairing it at score zero.
pub fn max_score_assignment<S: Scalar>(scores: &[Vec<S>]) -> Vec<(usize, usize)> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(scores.iter().all(|r| r.len() == cols));
    debug_assert!(scores.iter().flatten().all(|&s| s >= S::zero()));

    // Pad to square and minimize negated scores; dummy cells cost zero,
    // which models "leave unassigned".
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> S {
        if i < rows && j < cols {
            -scores[i][j]
        } else {
            S::zero()
        }
    };

    // Kuhn–Munkres with row/column potentials, 1-indexed internally.
    let mut u = vec![S::zero(); n + 1];
    let mut v = vec![S::zero(); n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[col] = row
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![S::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = S::infinity();
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] = v[j] - delta;
                } else {
                    min_slack[j] = min_slack[j] - delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let i = matched_row[j];
            if i >= 1 && i - 1 < rows && j - 1 < cols && scores[i - 1][j - 1] > S::zero() {
                Some((i - 1, j - 1))
            } else {
                None
            }
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Total score of an assignment over the given matrix.
pub fn assignment_total<S: Scalar>(scores: &[Vec<S>], pairs: &[(usize, usize)]) -> S {
    pairs.iter().map(|&(i, j)| scores[i][j]).sum()
}
