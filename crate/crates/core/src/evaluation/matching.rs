//! Maximum-weight bipartite matching via the Hungarian algorithm.

use crate::error::{ChanError, Result};

/// One matched pair `(row, col, weight)`.
pub type MatchedPair = (usize, usize, f64);

/// Maximum-weight matching between the rows and columns of a non-negative
/// `p×q` weight matrix.
///
/// The matrix is padded to square with zero weights and solved as a
/// minimum-cost assignment on negated weights (O(n³) shortest augmenting
/// paths with potentials). Pairs of zero weight are dropped; the rest are
/// returned sorted by row.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Result<Vec<MatchedPair>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    for (r, row) in weights.iter().enumerate() {
        if row.len() != cols {
            return Err(ChanError::shape("max_weight_matching", &[rows, cols], &[r, row.len()]));
        }
        if let Some((c, &w)) = row.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(ChanError::NegativeWeight { row: r, col: c, value: w });
        }
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<MatchedPair> = (1..=n)
        .filter_map(|j| {
            let (r, c) = (owner[j] - 1, j - 1);
            (r < rows && c < cols && weights[r][c] > 0.0).then(|| (r, c, weights[r][c]))
        })
        .collect();
    pairs.sort_by_key(|&(r, c, _)| (r, c));
    Ok(pairs)
}

/// Sum of pair weights in row order.
pub fn total_weight(pairs: &[MatchedPair]) -> f64 {
    pairs.iter().map(|p| p.2).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_favoring() {
        let m = max_weight_matching(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m, vec![(0, 0, 1.0), (1, 1, 1.0)]);
    }

    #[test]
    fn beats_greedy() {
        let m = max_weight_matching(&[vec![0.9, 0.8], vec![0.9, 0.1]]).unwrap();
        assert_eq!(m, vec![(0, 1, 0.8), (1, 0, 0.9)]);
        assert!((total_weight(&m) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn rectangular_and_zero_pairs() {
        let m = max_weight_matching(&[vec![0.0, 0.5, 0.0]]).unwrap();
        assert_eq!(m, vec![(0, 1, 0.5)]);
        let m = max_weight_matching(&[vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        assert!(m.is_empty());
        assert!(max_weight_matching(&[]).unwrap().is_empty());
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(matches!(
            max_weight_matching(&[vec![0.1, -0.2]]),
            Err(ChanError::NegativeWeight { row: 0, col: 1, .. })
        ));
        assert!(max_weight_matching(&[vec![f64::NAN]]).is_err());
    }
}
