//! Maximum-total-similarity one-to-one assignment.
//!
//! Inadmissible pairs are `None`. Among maximum-total matchings, pairs are
//! preferred in lexicographic (row, col) index order; callers sort their
//! term lists so index order is term order.

/// Tolerance for "achieves the optimal total" checks during tie-breaking.
/// Wide enough to absorb float accumulation, narrow enough that distinct
/// totals of normalized-edit-ratio weights stay separated at test scales.
const TOTAL_EPS: f64 = 1e-9;

/// Solve for the lexicographically-preferred maximum-total matching.
/// Weights must be non-negative. Returns (row, col) pairs, row-major order.
pub(crate) fn lex_optimal_matching(weights: &[Vec<Option<f64>>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(weights
        .iter()
        .flatten()
        .flatten()
        .all(|w| *w >= 0.0 && w.is_finite()));

    let optimum = max_total(weights, &[], &[]);
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut locked: Vec<(usize, usize)> = Vec::new();
    let mut locked_total = 0.0;

    for i in 0..rows {
        if row_used[i] {
            continue;
        }
        for j in 0..cols {
            if col_used[j] {
                continue;
            }
            let Some(w) = weights[i][j] else { continue };
            // Lock (i, j) if the rest can still reach the optimum.
            let mut rows_masked = row_used.clone();
            let mut cols_masked = col_used.clone();
            rows_masked[i] = true;
            cols_masked[j] = true;
            let rest = max_total(weights, &rows_masked, &cols_masked);
            if locked_total + w + rest >= optimum - TOTAL_EPS {
                locked.push((i, j));
                locked_total += w;
                row_used[i] = true;
                col_used[j] = true;
                break;
            }
        }
    }
    locked
}

/// Maximum achievable total over unmasked rows and columns.
fn max_total(weights: &[Vec<Option<f64>>], row_mask: &[bool], col_mask: &[bool]) -> f64 {
    let rows: Vec<usize> = (0..weights.len())
        .filter(|&i| row_mask.get(i) != Some(&true))
        .collect();
    let cols: Vec<usize> = (0..weights.first().map_or(0, |r| r.len()))
        .filter(|&j| col_mask.get(j) != Some(&true))
        .collect();
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // Square profit matrix: admissible weight, or 0 for inadmissible and
    // padding cells. Zero-profit cells never displace admissible ones.
    let n = rows.len().max(cols.len());
    let mut cost = vec![vec![0.0f64; n]; n];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            if let Some(w) = weights[i][j] {
                cost[ri][ci] = -w;
            }
        }
    }
    let assignment = min_cost_assignment(&cost);
    let mut total = 0.0;
    for (ri, &ci) in assignment.iter().enumerate() {
        if ri < rows.len() && ci < cols.len() {
            if let Some(w) = weights[rows[ri]][cols[ci]] {
                total += w;
            }
        }
    }
    total
}

/// O(n^3) Hungarian algorithm with dual potentials on a square cost matrix.
/// Returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)
    let mut path = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![inf; n + 1];
        let mut visited = vec![false; n + 1];
        loop {
            visited[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    path[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        loop {
            let j1 = path[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}
