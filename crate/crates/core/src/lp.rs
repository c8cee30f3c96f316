//! Revised simplex for `min c'x  s.t.  Ax = b, x >= 0`.
//!
//! Columns are sparse; the basis inverse is kept dense and updated with
//! product-form pivots, with a fresh factorization every
//! [`REFACTOR_EVERY`] pivots. The caller supplies a starting basis. Rows
//! can be appended after a solve with their own slack basic; the basis
//! stays dual feasible, so [`RevisedSimplex::dual`] restores primal
//! feasibility with a few pivots instead of a cold restart.

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Default)]
pub struct SparseCol {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseCol {
    pub fn push(&mut self, row: usize, val: f64) {
        self.rows.push(row);
        self.vals.push(val);
    }

    #[inline]
    fn dot(&self, dense: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.vals)
            .map(|(&r, &v)| dense[r] * v)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct RevisedSimplex {
    m: usize,
    cols: Vec<SparseCol>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Row of the basis holding each column, `usize::MAX` if nonbasic.
    position: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    pub pivots: usize,
}

impl RevisedSimplex {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            m: rhs.len(),
            cols: Vec::new(),
            cost: Vec::new(),
            rhs,
            basis: Vec::new(),
            position: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            since_refactor: 0,
            pivots: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn add_column(&mut self, col: SparseCol, cost: f64) -> usize {
        debug_assert!(col.rows.iter().all(|&r| r < self.m));
        self.cols.push(col);
        self.cost.push(cost);
        self.position.push(usize::MAX);
        self.cols.len() - 1
    }

    /// Installs `basis` (one column per row) and factorizes it.
    pub fn set_basis(&mut self, basis: Vec<usize>) -> Result<()> {
        if basis.len() != self.m {
            return Err(Error::Lp("basis size differs from row count"));
        }
        self.position.iter_mut().for_each(|p| *p = usize::MAX);
        for (r, &c) in basis.iter().enumerate() {
            if self.position[c] != usize::MAX {
                return Err(Error::Lp("column repeated in basis"));
            }
            self.position[c] = r;
        }
        self.basis = basis;
        self.refactor()
    }

    /// Appends the row `sum_k coefs[k].1 * x_{coefs[k].0} + s = rhs` with a
    /// new zero-cost slack `s >= 0` entering the basis. Returns the slack's
    /// column index.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.m;
        if self.basis.len() != self.m {
            // No basis installed yet: the slack waits for `set_basis`.
            for &(c, v) in coefs {
                self.cols[c].push(row, v);
            }
            self.m += 1;
            self.rhs.push(rhs);
            let mut col = SparseCol::default();
            col.push(row, 1.0);
            return self.add_column(col, 0.0);
        }
        let mut basic_coef = vec![0.0; self.m];
        for &(c, v) in coefs {
            self.cols[c].push(row, v);
            let p = self.position[c];
            if p != usize::MAX {
                basic_coef[p] += v;
            }
        }
        let m = self.m;
        let mut binv = vec![0.0; (m + 1) * (m + 1)];
        for r in 0..m {
            binv[r * (m + 1)..r * (m + 1) + m].copy_from_slice(&self.binv[r * m..(r + 1) * m]);
        }
        // New inverse row: [-r_B' B^-1, 1].
        for k in 0..m {
            let a = basic_coef[k];
            if a != 0.0 {
                let src = &self.binv[k * m..(k + 1) * m];
                let dst = &mut binv[m * (m + 1)..m * (m + 1) + m];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= a * s;
                }
            }
        }
        binv[m * (m + 1) + m] = 1.0;
        let slack_value = rhs - basic_coef.iter().zip(&self.xb).map(|(a, x)| a * x).sum::<f64>();

        self.m += 1;
        self.rhs.push(rhs);
        self.binv = binv;
        self.xb.push(slack_value);
        let mut col = SparseCol::default();
        col.push(row, 1.0);
        let slack = self.add_column(col, 0.0);
        self.position[slack] = row;
        self.basis.push(slack);
        slack
    }

    pub fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &c) in self.basis.iter().enumerate() {
            let col = &self.cols[c];
            for (&r, &v) in col.rows.iter().zip(&col.vals) {
                a[r * m + k] = v;
            }
        }
        self.binv = invert(m, a).ok_or(Error::Lp("singular basis"))?;
        self.xb = (0..m)
            .map(|r| {
                self.binv[r * m..(r + 1) * m]
                    .iter()
                    .zip(&self.rhs)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &c) in self.basis.iter().enumerate() {
            let cb = self.cost[c];
            if cb != 0.0 {
                for (yr, b) in y.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *yr += cb * b;
                }
            }
        }
        y
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let col = &self.cols[q];
        let mut w = vec![0.0; m];
        for (k, wk) in w.iter_mut().enumerate() {
            let row = &self.binv[k * m..(k + 1) * m];
            *wk = col.rows.iter().zip(&col.vals).map(|(&r, &v)| row[r] * v).sum();
        }
        w
    }

    fn pivot(&mut self, leave: usize, enter: usize, w: &[f64]) -> Result<()> {
        let m = self.m;
        let theta = self.xb[leave] / w[leave];
        for (k, x) in self.xb.iter_mut().enumerate() {
            if k != leave {
                *x -= theta * w[k];
            }
        }
        self.xb[leave] = theta;

        let inv_piv = 1.0 / w[leave];
        let (before, rest) = self.binv.split_at_mut(leave * m);
        let (prow, after) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v *= inv_piv);
        for (k, chunk) in before.chunks_exact_mut(m).enumerate() {
            let f = w[k];
            if f != 0.0 {
                chunk.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }
        for (k, chunk) in after.chunks_exact_mut(m).enumerate() {
            let f = w[leave + 1 + k];
            if f != 0.0 {
                chunk.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }

        let old = self.basis[leave];
        self.position[old] = usize::MAX;
        self.basis[leave] = enter;
        self.position[enter] = leave;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Primal simplex from a primal feasible basis.
    pub fn primal(&mut self, max_pivots: usize) -> Result<LpStatus> {
        let mut degenerate = 0usize;
        for _ in 0..max_pivots {
            let y = self.duals();
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut enter = usize::MAX;
            let mut best = -OPT_TOL;
            for (j, col) in self.cols.iter().enumerate() {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let d = self.cost[j] - col.dot(&y);
                if d < best {
                    enter = j;
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            if enter == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            let w = self.ftran(enter);
            let mut leave = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            for (k, &wk) in w.iter().enumerate() {
                if wk > PIVOT_TOL {
                    let ratio = self.xb[k].max(0.0) / wk;
                    let better = ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12
                            && leave != usize::MAX
                            && if bland {
                                self.basis[k] < self.basis[leave]
                            } else {
                                wk > w[leave]
                            });
                    if better {
                        best_ratio = ratio;
                        leave = k;
                    }
                }
            }
            if leave == usize::MAX {
                return Err(Error::Lp("unbounded"));
            }
            if self.xb[leave] <= FEAS_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.xb[leave] = self.xb[leave].max(0.0);
            self.pivot(leave, enter, &w)?;
        }
        Ok(LpStatus::IterationLimit)
    }

    /// Dual simplex from a dual feasible basis.
    pub fn dual(&mut self, max_pivots: usize) -> Result<LpStatus> {
        let m = self.m;
        for _ in 0..max_pivots {
            let mut leave = usize::MAX;
            let mut most = -FEAS_TOL;
            for (k, &x) in self.xb.iter().enumerate() {
                if x < most {
                    most = x;
                    leave = k;
                }
            }
            if leave == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            let y = self.duals();
            let rho = &self.binv[leave * m..(leave + 1) * m];
            let mut enter = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for (j, col) in self.cols.iter().enumerate() {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let alpha = col.dot(rho);
                if alpha < -PIVOT_TOL {
                    let d = (self.cost[j] - col.dot(&y)).max(0.0);
                    let ratio = d / -alpha;
                    if ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && -alpha > best_alpha)
                    {
                        best_ratio = ratio;
                        best_alpha = -alpha;
                        enter = j;
                    }
                }
            }
            if enter == usize::MAX {
                return Err(Error::Lp("primal infeasible"));
            }
            let w = self.ftran(enter);
            if w[leave].abs() < PIVOT_TOL {
                // Inverse has drifted; refresh and retry.
                self.refactor()?;
                continue;
            }
            self.pivot(leave, enter, &w)?;
        }
        Ok(LpStatus::IterationLimit)
    }

    pub fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&c, &x)| self.cost[c] * x)
            .sum()
    }

    /// Values of all columns, clamped at zero.
    pub fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cols.len()];
        for (&c, &v) in self.basis.iter().zip(&self.xb) {
            x[c] = v.max(0.0);
        }
        x
    }

    pub fn value_of(&self, col: usize) -> f64 {
        match self.position[col] {
            usize::MAX => 0.0,
            p => self.xb[p],
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting of a dense row-major matrix.
fn invert(n: usize, mut a: Vec<f64>) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let d = 1.0 / a[col * n + col];
        for k in 0..n {
            a[col * n + k] *= d;
            inv[col * n + k] *= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(entries: &[(usize, f64)]) -> SparseCol {
        let mut c = SparseCol::default();
        for &(r, v) in entries {
            c.push(r, v);
        }
        c
    }

    /// min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6.
    fn small() -> RevisedSimplex {
        let mut lp = RevisedSimplex::new(vec![4.0, 6.0]);
        lp.add_column(col(&[(0, 1.0), (1, 3.0)]), -1.0);
        lp.add_column(col(&[(0, 2.0), (1, 1.0)]), -1.0);
        lp.add_column(col(&[(0, 1.0)]), 0.0);
        lp.add_column(col(&[(1, 1.0)]), 0.0);
        lp.set_basis(vec![2, 3]).unwrap();
        lp
    }

    #[test]
    fn primal_solves_a_small_lp() {
        let mut lp = small();
        assert_eq!(lp.primal(100).unwrap(), LpStatus::Optimal);
        // Vertex (8/5, 6/5).
        assert!((lp.objective() + 2.8).abs() < 1e-12);
        let x = lp.solution();
        assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn added_row_is_restored_by_dual_simplex() {
        let mut lp = small();
        lp.primal(100).unwrap();
        // x + y + s3 = 2 cuts off the previous vertex.
        lp.add_row(&[(0, 1.0), (1, 1.0)], 2.0);
        assert_eq!(lp.dual(100).unwrap(), LpStatus::Optimal);
        assert_eq!(lp.primal(100).unwrap(), LpStatus::Optimal);
        assert!((lp.objective() + 2.0).abs() < 1e-12);
        let x = lp.solution();
        assert!(x[0] + x[1] <= 2.0 + 1e-12);
    }

    #[test]
    fn inverse_of_permutation_like_matrix() {
        let inv = invert(2, vec![0.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(inv, vec![0.0, 1.0, 0.5, 0.0]);
        assert!(invert(2, vec![1.0, 2.0, 2.0, 4.0]).is_none());
    }
}
