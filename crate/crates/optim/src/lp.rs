//! Dense linear programming.
//!
//! Problems are `min c·x` subject to `A x ≤ b` and per-variable bounds
//! `l ≤ x ≤ u` (either side may be infinite). Large row counts are handled by
//! constraint generation around the `microlp` simplex: the sub-problem over a
//! working set of rows is solved exactly, and the most violated remaining rows
//! are added until the sub-problem optimum satisfies every row. Every step is
//! deterministic.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex failed to reach the required accuracy: {0}")]
    Numerical(String),
}

/// `min cost·x` s.t. `rows·x ≤ rhs`, `lower ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub cost: DVector<f64>,
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LinearProgram {
    /// A program with free variables and no rows.
    pub fn new(cost: DVector<f64>) -> Self {
        let n = cost.len();
        Self {
            cost,
            rows: DMatrix::zeros(0, n),
            rhs: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    /// Builds a program from `(a, b)` pairs meaning `a·x ≤ b`.
    pub fn from_rows(cost: DVector<f64>, rows: &[(Vec<f64>, f64)]) -> Result<Self, LpError> {
        let n = cost.len();
        let mut data = Vec::with_capacity(rows.len() * n);
        let mut rhs = Vec::with_capacity(rows.len());
        for (a, b) in rows {
            if a.len() != n {
                return Err(LpError::Malformed(format!("row has {} coefficients, expected {n}", a.len())));
            }
            data.extend_from_slice(a);
            rhs.push(*b);
        }
        let mut lp = Self::new(cost);
        lp.rows = DMatrix::from_row_slice(rows.len(), n, &data);
        lp.rhs = DVector::from_vec(rhs);
        Ok(lp)
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.cost.dot(x)
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.rows.ncols() != n {
            return Err(LpError::Malformed(format!("constraint matrix has {} columns, expected {n}", self.rows.ncols())));
        }
        if self.rhs.len() != self.rows.nrows() {
            return Err(LpError::Malformed("rhs length differs from row count".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors differ from variable count".into()));
        }
        if self.cost.iter().chain(self.rows.iter()).any(|v| !v.is_finite()) || self.rhs.iter().any(|v| v.is_nan()) {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!("empty bound interval for variable {j}")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("bound of variable {j} is infinite on the wrong side")));
            }
        }
        Ok(())
    }

    /// Largest scaled residual of `x` over rows and bounds (0 when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.num_rows() {
            worst = worst.max(self.row_violation(i, x));
        }
        for j in 0..self.num_vars() {
            let scale = 1.0_f64.max(x[j].abs());
            worst = worst.max((self.lower[j] - x[j]) / scale);
            worst = worst.max((x[j] - self.upper[j]) / scale);
        }
        worst
    }

    fn row_violation(&self, i: usize, x: &DVector<f64>) -> f64 {
        let mut lhs = 0.0;
        let mut scale = 1.0_f64.max(self.rhs[i].abs());
        for j in 0..self.num_vars() {
            let t = self.rows[(i, j)] * x[j];
            lhs += t;
            scale = scale.max(t.abs());
        }
        (lhs - self.rhs[i]) / scale
    }
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    /// Scaled residual accepted as feasible.
    pub feasibility_tol: f64,
    /// Programs with at most this many rows are solved in one shot.
    pub direct_rows: usize,
    /// Rows added per constraint-generation round (0 picks a size from the variable count).
    pub batch: usize,
    /// Rows seeded into the first working set (e.g. the active set of a related solve).
    pub warm_rows: Vec<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, direct_rows: 300, batch: 0, warm_rows: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub cost: f64,
    /// Rows of the final working set, sorted. Useful as `warm_rows` for a related solve.
    pub working_rows: Vec<usize>,
    pub rounds: usize,
    pub pivots: usize,
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let r = lp.num_rows();
    let batch = if opts.batch == 0 { (4 * n).max(24) } else { opts.batch };

    let mut in_set = vec![false; r];
    let mut working: Vec<usize> = Vec::new();
    let add = |i: usize, in_set: &mut Vec<bool>, working: &mut Vec<usize>| {
        if i < r && !in_set[i] {
            in_set[i] = true;
            working.push(i);
        }
    };
    if r <= opts.direct_rows {
        for i in 0..r {
            add(i, &mut in_set, &mut working);
        }
    } else {
        for &i in &opts.warm_rows {
            add(i, &mut in_set, &mut working);
        }
        let x0 = DVector::from_fn(n, |j, _| 0.0_f64.clamp(lp.lower[j], lp.upper[j]));
        for i in most_violated(lp, &x0, &in_set, 2 * batch, opts.feasibility_tol) {
            add(i, &mut in_set, &mut working);
        }
    }

    let finite_scale = lp.rhs.iter().chain(lp.lower.iter()).chain(lp.upper.iter()).filter(|v| v.is_finite()).fold(1.0_f64, |m, v| m.max(v.abs()));
    let cap = 1e6 * finite_scale;
    let mut pivots = 0;
    for round in 1.. {
        working.sort_unstable();
        let mut result = solve_subproblem(lp, &working, None, &mut pivots);
        let mut capped = false;
        if matches!(result, Err(Inner::Unbounded)) && working.len() < r {
            // Bound the relaxation so its optimum exposes violated rows.
            result = solve_subproblem(lp, &working, Some(cap), &mut pivots);
            capped = true;
        }
        match result {
            Ok(x) => {
                let fresh = most_violated(lp, &x, &in_set, batch, opts.feasibility_tol);
                if fresh.is_empty() {
                    if capped {
                        // Every row holds on the box boundary: settle it on the full program.
                        for i in 0..r {
                            add(i, &mut in_set, &mut working);
                        }
                        continue;
                    }
                    let residual = lp.max_violation(&x);
                    if residual > 1e-8 {
                        return Err(LpError::Numerical(format!("final residual {residual:e}")));
                    }
                    let cost = lp.objective(&x);
                    return Ok(LpSolution { x, cost, working_rows: working, rounds: round, pivots });
                }
                for i in fresh {
                    add(i, &mut in_set, &mut working);
                }
            }
            Err(Inner::Unbounded) => return Err(LpError::Unbounded),
            Err(Inner::Infeasible) => return Err(LpError::Infeasible),
            Err(Inner::Failed(msg)) => return Err(LpError::Numerical(msg)),
        }
    }
    unreachable!()
}

fn most_violated(lp: &LinearProgram, x: &DVector<f64>, in_set: &[bool], count: usize, tol: f64) -> Vec<usize> {
    let lhs = &lp.rows * x;
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for i in 0..lp.num_rows() {
        if in_set[i] {
            continue;
        }
        let excess = lhs[i] - lp.rhs[i];
        if excess <= 0.0 {
            continue;
        }
        let v = lp.row_violation(i, x);
        if v > tol {
            cand.push((v, i));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cand.truncate(count);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// Solves the program restricted to `working` rows.
/// `cap` optionally boxes every variable into `[-cap, cap]` on top of its own bounds.
fn solve_subproblem(lp: &LinearProgram, working: &[usize], cap: Option<f64>, pivots: &mut usize) -> Result<DVector<f64>, Inner> {
    let mut problem = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
    let c = cap.unwrap_or(f64::INFINITY);
    let vars: Vec<microlp::Variable> =
        (0..lp.num_vars()).map(|j| problem.add_var(lp.cost[j], (lp.lower[j].max(-c).min(lp.upper[j]), lp.upper[j].min(c).max(lp.lower[j])))).collect();
    for &i in working {
        let terms: Vec<(microlp::Variable, f64)> =
            vars.iter().enumerate().filter(|(j, _)| lp.rows[(i, *j)] != 0.0).map(|(j, v)| (*v, lp.rows[(i, j)])).collect();
        if terms.is_empty() {
            if lp.rhs[i] < -1e-12 * (1.0 + lp.rhs[i].abs()) {
                return Err(Inner::Infeasible);
            }
            continue;
        }
        problem.add_constraint(terms.as_slice(), microlp::ComparisonOp::Le, lp.rhs[i]);
    }
    let outcome = problem.solve().map_err(|e| match e {
        microlp::Error::Infeasible => Inner::Infeasible,
        microlp::Error::Unbounded => Inner::Unbounded,
        other => Inner::Failed(other.to_string()),
    })?;
    let solution = outcome.into_solution().map_err(|e| Inner::Failed(format!("{e:?}")))?;
    *pivots += solution.stats().lp_iterations as usize;
    Ok(DVector::from_iterator(vars.len(), vars.iter().map(|v| solution.var_value(*v))))
}

enum Inner {
    Infeasible,
    Unbounded,
    Failed(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: &[f64], rows: &[(&[f64], f64)]) -> LinearProgram {
        let rows: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, b)| (a.to_vec(), *b)).collect();
        LinearProgram::from_rows(DVector::from_column_slice(cost), &rows).unwrap()
    }

    #[test]
    fn single_lower_bound() {
        // min x s.t. x ≥ 1, x ≥ 0
        let p = lp(&[1.0], &[(&[-1.0], -1.0), (&[-1.0], 0.0)]);
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_lower_bounds() {
        let p = lp(&[1.0, 1.0], &[(&[-1.0, 0.0], -0.5), (&[0.0, -1.0], -0.25)]);
        let s = solve_lp(&p).unwrap();
        assert!((s.cost - 0.75).abs() < 1e-12);
        assert!((s.x[0] - 0.5).abs() < 1e-12 && (s.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let p = lp(&[1.0], &[(&[1.0], -1.0), (&[-1.0], -1.0)]);
        assert_eq!(solve_lp(&p).unwrap_err(), LpError::Infeasible);
        let p = lp(&[-1.0], &[(&[-1.0], 0.0)]);
        assert_eq!(solve_lp(&p).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn respects_variable_bounds() {
        let p = LinearProgram::new(DVector::from_vec(vec![-1.0, 1.0]))
            .with_bounds(DVector::from_vec(vec![f64::NEG_INFINITY, -2.0]), DVector::from_vec(vec![3.0, f64::INFINITY]));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.x.as_slice(), &[3.0, -2.0]);
    }

    #[test]
    fn constraint_generation_matches_direct_solve() {
        // Outer polygon approximation of a disc: many redundant rows.
        let mut rows = Vec::new();
        for i in 0..2000 {
            let t = i as f64 * std::f64::consts::TAU / 2000.0;
            rows.push((vec![t.cos(), t.sin()], 1.0));
        }
        let p = LinearProgram::from_rows(DVector::from_vec(vec![1.0, 2.0]), &rows).unwrap();
        let cg = solve_lp(&p).unwrap();
        let direct = solve_lp_with(&p, &LpOptions { direct_rows: usize::MAX, ..Default::default() }).unwrap();
        assert!((cg.cost - direct.cost).abs() < 1e-9);
        assert!(cg.working_rows.len() < 2000);
        assert!(p.max_violation(&cg.x) <= 1e-8);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Several constraints meet at the optimum.
        let p = lp(&[-1.0, -1.0], &[(&[1.0, 0.0], 1.0), (&[0.0, 1.0], 1.0), (&[1.0, 1.0], 2.0), (&[2.0, 1.0], 3.0), (&[1.0, 2.0], 3.0)]);
        let s = solve_lp(&p).unwrap();
        assert!((s.cost + 2.0).abs() < 1e-12);
    }
}
