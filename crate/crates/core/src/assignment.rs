//! Discrete optimal transport between two n-point empirical measures.
//!
//! With uniform weights the transport polytope is (1/n) times the Birkhoff
//! polytope, so an optimal plan is a permutation scaled by 1/n and the
//! problem reduces to linear assignment. [`solve_assignment`] runs the
//! O(n^3) Hungarian method with dual potentials; [`brute_force_assignment`]
//! enumerates permutations and only exists as a reference for small n.

use crate::error::{Error, Result};

/// Largest size accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// Square matrix of nonnegative transport costs, stored row-major.
///
/// `f64::INFINITY` marks a cell that can never be used (an observation that
/// the model cannot rationalize from that latent draw).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch {
                what: "cost matrix order",
                expected: 1,
                got: 0,
            });
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "cost matrix entries",
                expected: n * n,
                got: data.len(),
            });
        }
        for (k, &value) in data.iter().enumerate() {
            if value.is_nan() || value < 0.0 || value == f64::NEG_INFINITY {
                return Err(Error::InvalidCost {
                    row: k / n,
                    col: k % n,
                    value,
                });
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "cost matrix row length",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    /// Builds the matrix from a cell function `f(row, col)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Average cost of the plan that sends row `i` to column `perm[i]`.
    pub fn plan_value(&self, perm: &[usize]) -> f64 {
        let total: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum();
        total / self.n as f64
    }
}

/// Extreme-point solution of the transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Row `i` is matched to column `permutation[i]`.
    pub permutation: Vec<usize>,
    /// `(1/n) * sum_i C[i, permutation[i]]`.
    pub value: f64,
}

/// Minimum of `(1/n) sum_i C[i, sigma(i)]` over permutations `sigma`.
pub fn solve_assignment(cost: &CostMatrix) -> Result<TransportPlan> {
    let n = cost.n();
    let max_finite = cost
        .as_slice()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_finite == f64::NEG_INFINITY {
        return Err(Error::Infeasible);
    }
    // Any permutation through a sentinel cell costs more than every
    // all-finite permutation.
    let sentinel = n as f64 * max_finite + 1.0;
    let has_inf = cost.as_slice().iter().any(|v| v.is_infinite());

    let permutation = if has_inf {
        let replaced: Vec<f64> = cost
            .as_slice()
            .iter()
            .map(|&v| if v.is_finite() { v } else { sentinel })
            .collect();
        hungarian(n, &replaced)
    } else {
        hungarian(n, cost.as_slice())
    };

    if has_inf
        && permutation
            .iter()
            .enumerate()
            .any(|(i, &j)| cost.get(i, j).is_infinite())
    {
        return Err(Error::Infeasible);
    }
    let value = cost.plan_value(&permutation);
    Ok(TransportPlan { permutation, value })
}

/// Shortest augmenting path method on a dense row-major matrix, with
/// column reduction for the starting duals. Returns the column assigned to
/// each row.
fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    const FREE: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col_of = vec![FREE; n];
    let mut row_of = vec![FREE; n];

    // v_j = min_i C_ij keeps every reduced cost nonnegative; a column's
    // first minimizing row is matched right away if still free.
    for j in 0..n {
        let mut best = 0usize;
        for i in 1..n {
            if cost[i * n + j] < cost[best * n + j] {
                best = i;
            }
        }
        v[j] = cost[best * n + j];
        if col_of[best] == FREE {
            col_of[best] = j;
            row_of[j] = best;
        }
    }

    let mut dist = vec![0.0f64; n];
    let mut pred = vec![0usize; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut scanned_rows: Vec<usize> = Vec::with_capacity(n);
    let mut scanned_cols: Vec<usize> = Vec::with_capacity(n);
    for start in 0..n {
        if col_of[start] != FREE {
            continue;
        }
        dist.fill(f64::INFINITY);
        remaining.clear();
        remaining.extend(0..n);
        scanned_rows.clear();
        scanned_cols.clear();
        let mut reach = 0.0f64;
        let mut i = start;
        let sink = loop {
            scanned_rows.push(i);
            let row = &cost[i * n..(i + 1) * n];
            let ui = u[i];
            let mut lowest = f64::INFINITY;
            let mut pick = 0usize;
            for (k, &j) in remaining.iter().enumerate() {
                let r = reach + row[j] - ui - v[j];
                if r < dist[j] {
                    dist[j] = r;
                    pred[j] = i;
                }
                // Prefer a free column among equals so the path ends early.
                if dist[j] < lowest || (dist[j] == lowest && row_of[j] == FREE) {
                    lowest = dist[j];
                    pick = k;
                }
            }
            reach = lowest;
            let j = remaining.swap_remove(pick);
            scanned_cols.push(j);
            if row_of[j] == FREE {
                break j;
            }
            i = row_of[j];
        };

        u[start] += reach;
        for &r in &scanned_rows[1..] {
            u[r] += reach - dist[col_of[r]];
        }
        for &j in &scanned_cols {
            v[j] -= reach - dist[j];
        }

        let mut j = sink;
        loop {
            let r = pred[j];
            row_of[j] = r;
            let previous = col_of[r];
            col_of[r] = j;
            if r == start {
                break;
            }
            j = previous;
        }
    }
    col_of
}

/// Exhaustive minimum over all n! permutations (Heap's algorithm).
pub fn brute_force_assignment(cost: &CostMatrix) -> Result<TransportPlan> {
    let n = cost.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best = total_cost(cost, &perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let total = total_cost(cost, &perm);
            if total < best {
                best = total;
                best_perm.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    if best.is_infinite() {
        return Err(Error::Infeasible);
    }
    let value = cost.plan_value(&best_perm);
    Ok(TransportPlan {
        permutation: best_perm,
        value,
    })
}

fn total_cost(cost: &CostMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}
