use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::measures::PointCloud;
use crate::numeric::{sq_dist, sum_compensated};

const NONE: usize = usize::MAX;

/// An optimal matching `i ↦ permutation[i]` and its cost `Σ ½‖X_i − Y_π(i)‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPlan {
    pub permutation: Vec<usize>,
    pub objective: f64,
}

/// Exact minimum-cost perfect matching between two equal-size clouds under
/// `½‖x − y‖²`.
///
/// Identical target points are pooled into one column with a capacity, and
/// the pooled problem is solved by successive shortest augmenting paths
/// (Dijkstra on reduced costs with row and column potentials). With all
/// targets distinct this is the usual `O(n³)` shortest-augmenting-path
/// method; with `J` distinct targets it costs `O(n² J)`. Copies of the same
/// target are interchangeable, so the expanded permutation is optimal for the
/// original problem.
pub fn solve_assignment(xs: &PointCloud, ys: &PointCloud) -> Result<AssignmentPlan> {
    let n = xs.len();
    if ys.len() != n {
        return Err(invalid(format!("assignment needs equal sizes, got {} and {}", n, ys.len())));
    }
    if xs.dim() != ys.dim() {
        return Err(invalid("source and target dimensions differ"));
    }

    let mut slot_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, y) in ys.iter().enumerate() {
        let key: Vec<u64> = y.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect();
        let slot = *slot_of.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(k);
    }
    let cols = groups.len();
    let mut cost = Vec::with_capacity(n * cols);
    for x in xs.iter() {
        for g in &groups {
            cost.push(0.5 * sq_dist(x, ys.point(g[0])));
        }
    }
    let caps: Vec<usize> = groups.iter().map(Vec::len).collect();
    let col_of_row = augmenting_paths(&cost, n, &caps);

    let mut next_in_group = vec![0usize; cols];
    let mut permutation = vec![NONE; n];
    for (i, &j) in col_of_row.iter().enumerate() {
        permutation[i] = groups[j][next_in_group[j]];
        next_in_group[j] += 1;
    }
    let objective = sum_compensated(xs.iter().zip(&permutation).map(|(x, &k)| 0.5 * sq_dist(x, ys.point(k))));
    Ok(AssignmentPlan { permutation, objective })
}

/// Rows `0..n` to columns with capacities summing to `n`; returns the column
/// of each row. `cost` is row-major `n × caps.len()`.
fn augmenting_paths(cost: &[f64], n: usize, caps: &[usize]) -> Vec<usize> {
    let cols = caps.len();
    debug_assert_eq!(caps.iter().sum::<usize>(), n);
    let c = |i: usize, j: usize| cost[i * cols + j];

    // Reduced costs c(i,j) − u_i − v_j stay nonnegative and vanish on matched pairs.
    let mut u: Vec<f64> = (0..n).map(|i| (0..cols).map(|j| c(i, j)).fold(f64::INFINITY, f64::min)).collect();
    let mut v = vec![0.0; cols];
    let mut col_of_row = vec![NONE; n];
    let mut rows_of_col: Vec<Vec<usize>> = vec![Vec::new(); cols];

    let mut dist = vec![f64::INFINITY; cols];
    let mut pred = vec![NONE; cols];
    let mut done = vec![false; cols];
    let mut finalized: Vec<usize> = Vec::with_capacity(cols);
    let mut visited: Vec<(usize, f64)> = Vec::new();

    for root in 0..n {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        done.iter_mut().for_each(|d| *d = false);
        finalized.clear();
        visited.clear();

        let relax = |i: usize, di: f64, u: &[f64], v: &[f64], dist: &mut [f64], pred: &mut [usize], done: &[bool]| {
            let row = &cost[i * cols..(i + 1) * cols];
            for k in 0..cols {
                if !done[k] {
                    let nd = di + row[k] - u[i] - v[k];
                    if nd < dist[k] {
                        dist[k] = nd;
                        pred[k] = i;
                    }
                }
            }
        };

        visited.push((root, 0.0));
        relax(root, 0.0, &u, &v, &mut dist, &mut pred, &done);
        let (sink, reach) = loop {
            let mut j = NONE;
            let mut best = f64::INFINITY;
            for k in 0..cols {
                if !done[k] && (j == NONE || dist[k] < best) {
                    best = dist[k];
                    j = k;
                }
            }
            done[j] = true;
            finalized.push(j);
            if rows_of_col[j].len() < caps[j] {
                break (j, best);
            }
            for &i in &rows_of_col[j] {
                visited.push((i, best));
                relax(i, best, &u, &v, &mut dist, &mut pred, &done);
            }
        };

        for &(i, di) in &visited {
            u[i] += reach - di;
        }
        for &j in &finalized {
            v[j] -= reach - dist[j];
        }

        let mut j = sink;
        loop {
            let i = pred[j];
            let prev = col_of_row[i];
            col_of_row[i] = j;
            rows_of_col[j].push(i);
            if prev == NONE {
                break;
            }
            let pos = rows_of_col[prev].iter().position(|&r| r == i).expect("row listed under its column");
            rows_of_col[prev].swap_remove(pos);
            j = prev;
        }
    }
    col_of_row
}
