//! Maximum-weight one-to-one assignment (Hungarian algorithm with row/column
//! potentials and shortest augmenting paths, O(n³)).

use ndarray::Array2;

use crate::error::{Error, Result};

/// Optimal one-to-one assignment maximizing the total weight. Returns one
/// entry per row: the matched column, or `None` when there are more rows
/// than columns and the row stays unmatched.
pub fn max_assignment(weights: &Array2<f64>) -> Result<Vec<Option<usize>>> {
    let (rows, cols) = weights.dim();
    if rows == 0 || cols == 0 {
        return Ok(vec![None; rows]);
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("max_assignment: weights must be finite"));
    }
    // Minimize cost = -weight on a square matrix padded with zero-weight
    // dummies, using 1-based indices with column 0 as the virtual source.
    let n = rows.max(cols);
    let mut cost = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..rows {
        for j in 0..cols {
            cost[i + 1][j + 1] = -weights[[i, j]];
        }
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // by column; 0 = unmatched
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0][j] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = matched_row[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    Ok(out)
}

/// Total weight of an assignment.
pub fn assignment_value(weights: &Array2<f64>, assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[[i, j]]))
        .sum()
}
