//! Critical-value statistics over a set of admissible cost matrices.
//!
//! Column `j` of an admissible matrix is any of the candidate columns in
//! `choices.columns[j]`. The non-convexified statistic maximizes the
//! transport value over every selection; the convexified one swaps the min
//! and the max,
//!
//! ```text
//! min over plans pi of  sum_j max_y <pi_{.j}, c_j(y)>,
//! ```
//!
//! and is computed by a cutting-plane method whose master problems are
//! linear programs over the transport polytope.

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::lp::{LpStatus, RevisedSimplex, SparseCol};

/// Candidate cost columns for each column of the cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnChoiceSet {
    n: usize,
    columns: Vec<Vec<Vec<f64>>>,
}

impl ColumnChoiceSet {
    /// `columns[j]` lists the candidate columns for `j`, each of length
    /// `n = columns.len()`. Exact duplicates are dropped. An empty list means
    /// the model made no prediction for that column.
    pub fn new(columns: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::InvalidInput("choice set needs at least one column".into()));
        }
        let mut deduped = Vec::with_capacity(n);
        for list in columns {
            let mut kept: Vec<Vec<f64>> = Vec::with_capacity(list.len());
            for c in list {
                if c.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "candidate column length",
                        expected: n,
                        got: c.len(),
                    });
                }
                if c.iter().any(|v| v.is_nan() || *v < 0.0) {
                    return Err(Error::InvalidInput("candidate costs must be nonnegative".into()));
                }
                if !kept.contains(&c) {
                    kept.push(c);
                }
            }
            deduped.push(kept);
        }
        Ok(Self {
            n,
            columns: deduped,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn choices(&self, j: usize) -> &[Vec<f64>] {
        &self.columns[j]
    }

    pub fn has_empty_column(&self) -> bool {
        self.columns.iter().any(Vec::is_empty)
    }

    /// Number of distinct admissible matrices.
    pub fn selection_count(&self) -> f64 {
        self.columns.iter().map(|c| c.len() as f64).product()
    }

    /// Matrix with column `j` taken from `self.choices(j)[pick[j]]`.
    pub fn assemble(&self, pick: &[usize]) -> Result<CostMatrix> {
        let n = self.n;
        CostMatrix::from_fn(n, |i, j| self.columns[j][pick[j]][i])
    }
}

/// Largest transport value over every admissible selection.
pub fn ncx_critical_stat(choices: &ColumnChoiceSet, budget: u64) -> Result<f64> {
    if choices.has_empty_column() {
        return Ok(f64::INFINITY);
    }
    let size = choices.selection_count();
    if size > budget as f64 {
        return Err(Error::BudgetExceeded { size, budget });
    }
    let n = choices.n();
    let multi: Vec<usize> = (0..n).filter(|&j| choices.choices(j).len() > 1).collect();
    let mut pick = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let value = transport_value(&choices.assemble(&pick)?)?;
        best = best.max(value);
        // Odometer over the columns with several candidates.
        let mut advanced = false;
        for &j in &multi {
            pick[j] += 1;
            if pick[j] < choices.choices(j).len() {
                advanced = true;
                break;
            }
            pick[j] = 0;
        }
        if !advanced {
            return Ok(best);
        }
    }
}

fn transport_value(c: &CostMatrix) -> Result<f64> {
    match solve_assignment(c) {
        Ok(plan) => Ok(plan.value),
        Err(Error::Infeasible) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// How the master problem aggregates the cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutStrategy {
    /// One epigraph variable per column with several candidates; a cut is a
    /// single candidate column.
    #[default]
    PerColumn,
    /// One epigraph variable; a cut is a whole assembled matrix.
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CxSettings {
    pub tol: f64,
    pub max_iterations: usize,
    pub strategy: CutStrategy,
}

impl Default for CxSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 500,
            strategy: CutStrategy::PerColumn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Bracket gap within tolerance.
    Converged,
    /// Lower bound reached the threshold.
    AboveThreshold,
    /// Upper bound fell below the threshold.
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxResult {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Lower bound after each iteration.
    pub lower_history: Vec<f64>,
}

impl MinMaxResult {
    fn exact(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
            iterations: 1,
            converged: true,
            termination: Termination::Converged,
            lower_history: vec![value],
        }
    }

    /// Certified point value: the upper end of the bracket.
    pub fn value(&self) -> f64 {
        self.upper
    }
}

/// Convexified critical statistic by cutting planes.
///
/// With `threshold = Some(t)` the loop also stops as soon as the bracket
/// lies entirely on one side of `t` (lower bound `>= t`, or upper bound
/// `< t`); the comparison with `t` is then decided and `converged` is false
/// unless the gap also closed.
pub fn cx_critical_stat(
    choices: &ColumnChoiceSet,
    settings: &CxSettings,
    threshold: Option<f64>,
) -> Result<MinMaxResult> {
    if choices.has_empty_column() {
        return Ok(MinMaxResult::exact(f64::INFINITY));
    }
    let n = choices.n();
    let multi: Vec<usize> = (0..n).filter(|&j| choices.choices(j).len() > 1).collect();
    if multi.is_empty() {
        return Ok(MinMaxResult::exact(transport_value(
            &choices.assemble(&vec![0; n])?,
        )?));
    }

    // Best response to the uniform plan, then its transport value.
    let mut pick = vec![0usize; n];
    for &j in &multi {
        pick[j] = argmax_by(choices.choices(j), |c| c.iter().sum());
    }
    let first = choices.assemble(&pick)?;
    let plan = solve_assignment(&first)?;
    let mut lower = plan.value;
    let mut history = vec![lower];
    let mut pi = vec![0.0; n * n];
    for (i, &j) in plan.permutation.iter().enumerate() {
        pi[i * n + j] = 1.0 / n as f64;
    }
    let (mut upper, responses) = separation(choices, &pi);

    let mut master = Master::new(choices, settings.strategy, &multi, &pick);
    let mut iterations = 1;
    loop {
        if let Some(done) = check_stop(lower, upper, settings.tol, threshold) {
            return Ok(MinMaxResult {
                lower,
                upper,
                iterations,
                converged: done == Termination::Converged,
                termination: done,
                lower_history: history,
            });
        }
        if iterations >= settings.max_iterations {
            return Err(Error::MaxIterations {
                lower,
                upper,
                iterations,
            });
        }
        let added = if iterations == 1 {
            master.add_cuts(choices, &responses, &pi)
        } else {
            let (candidate, responses) = separation(choices, &pi);
            upper = upper.min(candidate);
            if let Some(done) = check_stop(lower, upper, settings.tol, threshold) {
                return Ok(MinMaxResult {
                    lower,
                    upper,
                    iterations,
                    converged: done == Termination::Converged,
                    termination: done,
                    lower_history: history,
                });
            }
            master.add_cuts(choices, &responses, &pi)
        };
        if !added {
            // Every best response is already a cut: the master is exact.
            upper = upper.max(lower);
            return Ok(MinMaxResult {
                lower,
                upper,
                iterations,
                converged: true,
                termination: Termination::Converged,
                lower_history: history,
            });
        }
        let value = master.solve(choices)?;
        iterations += 1;
        history.push(value);
        lower = lower.max(value);
        pi = master.plan();
    }
}

fn check_stop(lower: f64, upper: f64, tol: f64, threshold: Option<f64>) -> Option<Termination> {
    if upper - lower <= tol {
        return Some(Termination::Converged);
    }
    match threshold {
        Some(t) if lower >= t => Some(Termination::AboveThreshold),
        Some(t) if upper < t => Some(Termination::BelowThreshold),
        _ => None,
    }
}

fn argmax_by(columns: &[Vec<f64>], mut score: impl FnMut(&[f64]) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, c) in columns.iter().enumerate() {
        let s = score(c);
        if s > best_score {
            best_score = s;
            best = k;
        }
    }
    best
}

#[inline]
fn column_dot(pi: &[f64], n: usize, j: usize, c: &[f64]) -> f64 {
    (0..n).map(|i| pi[i * n + j] * c[i]).sum()
}

/// Best response of every column to the plan `pi` and the resulting upper
/// bound `sum_j max_y <pi_{.j}, c_j(y)>`.
fn separation(choices: &ColumnChoiceSet, pi: &[f64]) -> (f64, Vec<usize>) {
    let n = choices.n();
    let mut total = 0.0;
    let mut picks = Vec::with_capacity(n);
    for j in 0..n {
        let cols = choices.choices(j);
        let k = argmax_by(cols, |c| column_dot(pi, n, j, c));
        total += column_dot(pi, n, j, &cols[k]);
        picks.push(k);
    }
    (total, picks)
}

/// Master problem `min sum_g t_g + <base, pi>` over the transport polytope
/// with epigraph cuts `t_g >= <coef, pi>`.
struct Master {
    n: usize,
    strategy: CutStrategy,
    lp: RevisedSimplex,
    /// Epigraph column of each group.
    group_var: Vec<usize>,
    /// For PerColumn: group of each matrix column (usize::MAX if fixed).
    group_of: Vec<usize>,
    /// Cuts per group: the candidate indices (PerColumn) or full picks
    /// (Aggregated).
    cuts: Vec<Vec<Vec<usize>>>,
    cut_rows: Vec<(usize, usize)>,
    solved: bool,
}

impl Master {
    fn new(choices: &ColumnChoiceSet, strategy: CutStrategy, multi: &[usize], pick: &[usize]) -> Self {
        let n = choices.n();
        // Row i: sum_j pi_ij = 1/n; row n + j (j < n - 1): sum_i pi_ij = 1/n.
        let mut lp = RevisedSimplex::new(vec![1.0 / n as f64; 2 * n - 1]);
        let mut group_of = vec![usize::MAX; n];
        let groups = match strategy {
            CutStrategy::PerColumn => {
                for (g, &j) in multi.iter().enumerate() {
                    group_of[j] = g;
                }
                multi.len()
            }
            CutStrategy::Aggregated => 1,
        };
        for i in 0..n {
            for j in 0..n {
                let mut col = SparseCol::default();
                col.push(i, 1.0);
                if j < n - 1 {
                    col.push(n + j, 1.0);
                }
                let cost = match strategy {
                    CutStrategy::PerColumn if group_of[j] == usize::MAX => choices.choices(j)[0][i],
                    _ => 0.0,
                };
                lp.add_column(col, cost);
            }
        }
        let group_var = (0..groups).map(|_| lp.add_column(SparseCol::default(), 1.0)).collect();
        let mut master = Self {
            n,
            strategy,
            lp,
            group_var,
            group_of,
            cuts: vec![Vec::new(); groups],
            cut_rows: Vec::new(),
            solved: false,
        };
        match strategy {
            CutStrategy::PerColumn => {
                for &j in multi {
                    master.cuts[master.group_of[j]].push(vec![pick[j]]);
                }
            }
            CutStrategy::Aggregated => master.cuts[0].push(pick.to_vec()),
        }
        master
    }

    fn cut_coefs(&self, choices: &ColumnChoiceSet, group: usize, cut: &[usize]) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut coefs = Vec::new();
        match self.strategy {
            CutStrategy::PerColumn => {
                let j = self.group_of.iter().position(|&g| g == group).expect("group column");
                let c = &choices.choices(j)[cut[0]];
                for i in 0..n {
                    if c[i] != 0.0 {
                        coefs.push((i * n + j, c[i]));
                    }
                }
            }
            CutStrategy::Aggregated => {
                for i in 0..n {
                    for j in 0..n {
                        let v = choices.choices(j)[cut[j]][i];
                        if v != 0.0 {
                            coefs.push((i * n + j, v));
                        }
                    }
                }
            }
        }
        coefs.push((self.group_var[group], -1.0));
        coefs
    }

    /// Adds the best responses to `pi` that are not yet cuts. Returns false
    /// when nothing new was added.
    fn add_cuts(&mut self, choices: &ColumnChoiceSet, responses: &[usize], pi: &[f64]) -> bool {
        let mut fresh: Vec<(usize, Vec<usize>)> = Vec::new();
        match self.strategy {
            CutStrategy::PerColumn => {
                for (j, &g) in self.group_of.iter().enumerate() {
                    if g == usize::MAX {
                        continue;
                    }
                    let cut = vec![responses[j]];
                    if self.cuts[g].contains(&cut) {
                        continue;
                    }
                    let n = self.n;
                    let current = self.cuts[g]
                        .iter()
                        .map(|c| column_dot(pi, n, j, &choices.choices(j)[c[0]]))
                        .fold(f64::NEG_INFINITY, f64::max);
                    let candidate = column_dot(pi, n, j, &choices.choices(j)[cut[0]]);
                    if candidate > current + 1e-13 || !self.solved {
                        fresh.push((g, cut));
                    }
                }
            }
            CutStrategy::Aggregated => {
                let cut = responses.to_vec();
                if !self.cuts[0].contains(&cut) {
                    fresh.push((0, cut));
                }
            }
        }
        if fresh.is_empty() {
            return false;
        }
        for (g, cut) in fresh {
            self.cuts[g].push(cut);
            if self.solved {
                let coefs = self.cut_coefs(choices, g, self.cuts[g].last().expect("cut"));
                self.lp.add_row(&coefs, 0.0);
                self.cut_rows.push((g, self.cuts[g].len() - 1));
            }
        }
        if !self.solved {
            self.build_rows(choices);
        }
        true
    }

    fn build_rows(&mut self, choices: &ColumnChoiceSet) {
        for g in 0..self.cuts.len() {
            for k in 0..self.cuts[g].len() {
                let coefs = self.cut_coefs(choices, g, &self.cuts[g][k]);
                self.lp.add_row(&coefs, 0.0);
                self.cut_rows.push((g, k));
            }
        }
    }

    /// Basis for the identity plan: the staircase cells (i, i) and
    /// (i, i + 1) span the transport rows; in every group the epigraph
    /// variable is basic in the row of its largest cut, slacks elsewhere.
    fn cold_basis(&self, choices: &ColumnChoiceSet) -> Vec<usize> {
        let n = self.n;
        let mut basis = Vec::with_capacity(self.lp.rows());
        for i in 0..n {
            basis.push(i * n + i);
            if i + 1 < n {
                basis.push(i * n + i + 1);
            }
        }
        let first_slack = self.group_var.last().map_or(n * n, |&v| v + 1);
        let mut best_row = vec![(f64::NEG_INFINITY, usize::MAX); self.cuts.len()];
        for (r, &(g, k)) in self.cut_rows.iter().enumerate() {
            let v = self.value_at_identity(choices, g, &self.cuts[g][k]);
            if v > best_row[g].0 {
                best_row[g] = (v, r);
            }
        }
        for (r, &(g, _)) in self.cut_rows.iter().enumerate() {
            if best_row[g].1 == r {
                basis.push(self.group_var[g]);
            } else {
                basis.push(first_slack + r);
            }
        }
        basis
    }

    fn value_at_identity(&self, choices: &ColumnChoiceSet, group: usize, cut: &[usize]) -> f64 {
        let n = self.n;
        match self.strategy {
            CutStrategy::PerColumn => {
                let j = self.group_of.iter().position(|&g| g == group).expect("group column");
                choices.choices(j)[cut[0]][j] / n as f64
            }
            CutStrategy::Aggregated => {
                (0..n).map(|j| choices.choices(j)[cut[j]][j]).sum::<f64>() / n as f64
            }
        }
    }

    fn solve(&mut self, choices: &ColumnChoiceSet) -> Result<f64> {
        const MAX_PIVOTS: usize = 200_000;
        if !self.solved {
            self.solved = true;
            return self.cold_solve(choices, MAX_PIVOTS);
        }
        let warm = self
            .lp
            .dual(MAX_PIVOTS)
            .and_then(|s| match s {
                LpStatus::Optimal => self.lp.primal(MAX_PIVOTS),
                other => Ok(other),
            });
        match warm {
            Ok(LpStatus::Optimal) => Ok(self.lp.objective()),
            _ => self.cold_solve(choices, MAX_PIVOTS),
        }
    }

    fn cold_solve(&mut self, choices: &ColumnChoiceSet, max_pivots: usize) -> Result<f64> {
        let basis = self.cold_basis(choices);
        self.lp.set_basis(basis)?;
        match self.lp.primal(max_pivots)? {
            LpStatus::Optimal => Ok(self.lp.objective()),
            LpStatus::IterationLimit => Err(Error::Lp("iteration limit in master problem")),
        }
    }

    fn plan(&self) -> Vec<f64> {
        let mut x = self.lp.solution();
        x.truncate(self.n * self.n);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(columns: Vec<Vec<Vec<f64>>>) -> ColumnChoiceSet {
        ColumnChoiceSet::new(columns).unwrap()
    }

    fn both(choices: &ColumnChoiceSet) -> (f64, f64) {
        let per = cx_critical_stat(choices, &CxSettings::default(), None).unwrap();
        let agg = cx_critical_stat(
            choices,
            &CxSettings {
                strategy: CutStrategy::Aggregated,
                ..CxSettings::default()
            },
            None,
        )
        .unwrap();
        assert!(per.converged && agg.converged);
        (per.value(), agg.value())
    }

    #[test]
    fn convexification_can_exceed_the_pure_maximum() {
        // Column 0 is either e_0 or e_1; every pure selection transports at
        // zero cost, but the mixed plan has to pay 1/4.
        let c = set(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 0.0]]]);
        assert_eq!(ncx_critical_stat(&c, 100).unwrap(), 0.0);
        let (per, agg) = both(&c);
        assert!((per - 0.25).abs() < 1e-9, "{per}");
        assert!((agg - 0.25).abs() < 1e-9, "{agg}");
    }

    #[test]
    fn equal_values_when_a_pure_selection_is_worst() {
        let c = set(vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
        assert_eq!(ncx_critical_stat(&c, 100).unwrap(), 0.5);
        let (per, agg) = both(&c);
        assert!((per - 0.5).abs() < 1e-9 && (agg - 0.5).abs() < 1e-9);
    }

    #[test]
    fn singletons_reduce_to_the_transport_value() {
        let c = set(vec![vec![vec![3.0, 1.0]], vec![vec![1.0, 3.0]]]);
        assert_eq!(ncx_critical_stat(&c, 1).unwrap(), 1.0);
        let r = cx_critical_stat(&c, &CxSettings::default(), None).unwrap();
        assert_eq!((r.lower, r.upper, r.iterations), (1.0, 1.0, 1));
    }

    #[test]
    fn empty_column_is_infinite() {
        let c = set(vec![vec![vec![0.0, 0.0]], vec![]]);
        assert!(c.has_empty_column());
        assert_eq!(ncx_critical_stat(&c, 1).unwrap(), f64::INFINITY);
        assert_eq!(cx_critical_stat(&c, &CxSettings::default(), None).unwrap().value(), f64::INFINITY);
    }

    #[test]
    fn duplicates_are_dropped_and_shapes_checked() {
        let c = set(vec![vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![vec![0.0, 0.0]]]);
        assert_eq!(c.choices(0).len(), 1);
        assert_eq!(c.selection_count(), 1.0);
        assert!(ColumnChoiceSet::new(vec![]).is_err());
        assert!(ColumnChoiceSet::new(vec![vec![vec![1.0]], vec![vec![0.0, 0.0]]]).is_err());
        assert!(ColumnChoiceSet::new(vec![vec![vec![-1.0]]]).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let two = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let c = set(vec![two.clone(), two]);
        assert!(matches!(
            ncx_critical_stat(&c, 3),
            Err(Error::BudgetExceeded { size, budget: 3 }) if size == 4.0
        ));
    }

    #[test]
    fn threshold_stops_early() {
        let c = set(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 0.0]]]);
        let low = cx_critical_stat(&c, &CxSettings::default(), Some(-1.0)).unwrap();
        assert_eq!(low.termination, Termination::AboveThreshold);
        let high = cx_critical_stat(&c, &CxSettings::default(), Some(10.0)).unwrap();
        assert_eq!(high.termination, Termination::BelowThreshold);
        assert!(high.upper < 10.0);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut columns = Vec::new();
        let n = 6;
        for j in 0..n {
            columns.push(
                (0..3)
                    .map(|k| (0..n).map(|i| ((i * 7 + j * 3 + k * 5) % 11) as f64).collect())
                    .collect(),
            );
        }
        let c = set(columns);
        let settings = CxSettings {
            max_iterations: 1,
            ..CxSettings::default()
        };
        match cx_critical_stat(&c, &settings, None) {
            Err(Error::MaxIterations { lower, upper, iterations }) => {
                assert_eq!(iterations, 1);
                assert!(lower <= upper);
            }
            Ok(r) => assert!(r.converged),
            Err(e) => panic!("{e}"),
        }
    }
}
