//! Box-constrained derivative-free minimization.
//!
//! Each start runs a Nelder–Mead simplex search in coordinates normalized to
//! the unit box (trial points are projected back onto the box). When a
//! simplex collapses it is rebuilt around the incumbent with a smaller step,
//! until a rebuild stops paying off. Start 0 is the user's start point; the
//! others are drawn uniformly from the box with a seeded generator.
//!
//! Budget allocation is truncation-stable: start `i` receives
//! `clamp(budget − i·per_start, 0, per_start)` evaluations (the last start
//! takes the remainder), and each start's trajectory does not depend on its
//! share. Raising the budget therefore only extends trajectories, so the
//! returned cost never increases with budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Penalty added per unit of constraint violation for infeasible evaluations.
pub const PENALTY_WEIGHT: f64 = 1e3;

/// Cost substituted for non-finite objective values.
const NON_FINITE_COST: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    /// Constraint violation; feasible iff `margin <= 0`.
    pub margin: f64,
}

impl Evaluation {
    pub fn feasible(cost: f64) -> Self {
        Self { cost, margin: 0.0 }
    }

    pub fn infeasible(cost: f64, margin: f64) -> Self {
        Self { cost, margin: margin.max(f64::MIN_POSITIVE) }
    }

    pub fn is_feasible(&self) -> bool {
        self.margin <= 0.0 && self.cost.is_finite()
    }

    /// The value the simplex search actually ranks.
    pub fn penalized(&self) -> f64 {
        let base = if self.cost.is_finite() { self.cost } else { NON_FINITE_COST };
        let margin = if self.margin.is_nan() { NON_FINITE_COST } else { self.margin.max(0.0) };
        (base + PENALTY_WEIGHT * margin).min(NON_FINITE_COST)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DfoError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("no feasible point found within {evaluations} evaluations")]
    NoFeasiblePoint { evaluations: usize },
}

pub struct DfoProblem<F> {
    pub objective: F,
    pub bounds: Vec<(f64, f64)>,
    pub start: Vec<f64>,
    pub budget: usize,
    /// Number of starts (the first is `start`, the rest are seeded random draws).
    pub starts: usize,
    /// Evaluation cap per start.
    pub per_start: usize,
    pub seed: u64,
    /// Simplex collapse threshold in normalized coordinates.
    pub xtol: f64,
}

impl<F> DfoProblem<F>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    pub fn new(objective: F, bounds: Vec<(f64, f64)>, start: Vec<f64>, budget: usize) -> Self {
        Self { objective, bounds, start, budget, starts: 1, per_start: budget, seed: 0, xtol: 1e-7 }
    }

    pub fn with_starts(mut self, starts: usize, per_start: usize, seed: u64) -> Self {
        self.starts = starts;
        self.per_start = per_start;
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub feasible: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct DfoResult {
    pub best: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
    pub starts: Vec<StartSummary>,
}

pub fn minimize_dfo<F>(p: &DfoProblem<F>) -> Result<DfoResult, DfoError>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let d = p.bounds.len();
    if p.budget == 0 {
        return Err(DfoError::Invalid("budget must be positive".into()));
    }
    if p.start.len() != d {
        return Err(DfoError::Invalid(format!("start has {} entries for {d} bounds", p.start.len())));
    }
    for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(DfoError::Invalid(format!("bad bounds for parameter {j}")));
        }
        if !(lo..=hi).contains(&p.start[j]) {
            return Err(DfoError::Invalid(format!("start parameter {j} outside its bounds")));
        }
    }
    let starts = p.starts.max(1);
    let per_start = p.per_start.max(1);

    let shares: Vec<usize> = (0..starts)
        .map(|i| {
            let used = i.saturating_mul(per_start);
            let left = p.budget.saturating_sub(used);
            if i + 1 == starts {
                left
            } else {
                left.min(per_start)
            }
        })
        .collect();

    let start_points: Vec<Vec<f64>> = (0..starts)
        .map(|i| {
            if i == 0 {
                p.start.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64)));
                p.bounds.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect()
            }
        })
        .collect();

    let runs: Vec<StartSummary> = (0..starts).into_par_iter().map(|i| run_start(p, &start_points[i], shares[i])).collect();

    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let best = runs.iter().filter(|r| r.feasible).min_by(|a, b| a.best_cost.total_cmp(&b.best_cost));
    match best {
        Some(b) => Ok(DfoResult { best: b.best.clone(), cost: b.best_cost, evaluations, starts: runs.clone() }),
        None => Err(DfoError::NoFeasiblePoint { evaluations }),
    }
}

struct Search<'a, F> {
    objective: &'a F,
    bounds: &'a [(f64, f64)],
    budget: usize,
    used: usize,
    best_feasible: Option<(Vec<f64>, f64)>,
}

impl<F> Search<'_, F>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    fn to_params(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.bounds).map(|(&v, &(lo, hi))| lo + v.clamp(0.0, 1.0) * (hi - lo)).collect()
    }

    /// Penalized value at `u`, or `None` once the budget is spent.
    fn eval(&mut self, u: &[f64]) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        let x = self.to_params(u);
        let e = (self.objective)(&x);
        if e.is_feasible() {
            match &self.best_feasible {
                Some((_, c)) if *c <= e.cost => {}
                _ => self.best_feasible = Some((x, e.cost)),
            }
        }
        Some(e.penalized())
    }
}

fn run_start<F>(p: &DfoProblem<F>, start: &[f64], budget: usize) -> StartSummary
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let mut s = Search { objective: &p.objective, bounds: &p.bounds, budget, used: 0, best_feasible: None };
    let u0: Vec<f64> = start.iter().zip(&p.bounds).map(|(&x, &(lo, hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect();
    nelder_mead_with_restarts(&mut s, u0, p.xtol);
    let (best, best_cost, feasible) = match &s.best_feasible {
        Some((x, c)) => (x.clone(), *c, true),
        None => (start.to_vec(), f64::INFINITY, false),
    };
    StartSummary { start: start.to_vec(), best, best_cost, feasible, evaluations: s.used }
}

fn nelder_mead_with_restarts<F>(s: &mut Search<'_, F>, u0: Vec<f64>, xtol: f64)
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let Some(f0) = s.eval(&u0) else { return };
    let mut incumbent = (u0, f0);
    let mut step = 0.1;
    let mut idle_restarts = 0;
    while idle_restarts < 2 && step > xtol {
        let before = incumbent.1;
        match nelder_mead(s, &incumbent, step, xtol) {
            Some(found) => {
                if found.1 < incumbent.1 {
                    incumbent = found;
                }
            }
            None => return,
        }
        if incumbent.1 < before - 1e-12 * (1.0 + before.abs()) {
            idle_restarts = 0;
        } else {
            idle_restarts += 1;
        }
        step *= 0.5;
    }
}

/// One simplex run from `start`; `None` when the budget ran out mid-run.
fn nelder_mead<F>(s: &mut Search<'_, F>, start: &(Vec<f64>, f64), step: f64, xtol: f64) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let d = start.0.len();
    if d == 0 {
        return Some(start.clone());
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![start.clone()];
    for j in 0..d {
        let mut u = start.0.clone();
        u[j] = if u[j] + step <= 1.0 { u[j] + step } else { u[j] - step };
        let f = s.eval(&u)?;
        simplex.push((u, f));
    }

    let clamp = |u: Vec<f64>| -> Vec<f64> { u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex.iter().skip(1).map(|(u, _)| u.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if spread < xtol {
            return Some(simplex[0].clone());
        }

        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|(u, _)| u[j]).sum::<f64>() / d as f64).collect();

        let reflected = clamp(combine(&centroid, &worst.0, -1.0));
        let fr = s.eval(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = clamp(combine(&centroid, &worst.0, -2.0));
            let fe = s.eval(&expanded)?;
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = clamp(combine(&centroid, &reflected, 0.5));
            let f = s.eval(&c)?;
            (c, f)
        } else {
            let c = combine(&centroid, &worst.0, 0.5);
            let f = s.eval(&c)?;
            (c, f)
        };
        if fc < worst.1.min(fr) {
            simplex[d] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let u = combine(&best, &v.0, 0.5);
            let f = s.eval(&u)?;
            *v = (u, f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let p = DfoProblem::new(|x: &[f64]| Evaluation::feasible((x[0] - 3.0).powi(2)), vec![(0.0, 10.0)], vec![8.0], 500);
        let r = minimize_dfo(&p).unwrap();
        assert!((r.best[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn constraint_pushes_to_boundary() {
        let obj = |x: &[f64]| {
            if x[0] >= 2.0 {
                Evaluation::feasible(x[0])
            } else {
                Evaluation::infeasible(x[0], 2.0 - x[0])
            }
        };
        let p = DfoProblem::new(obj, vec![(0.0, 10.0)], vec![9.0], 500);
        let r = minimize_dfo(&p).unwrap();
        assert!(r.best[0] >= 2.0 && r.best[0] < 2.0 + 1e-3, "{:?}", r.best);
    }

    #[test]
    fn rosenbrock_bowl() {
        let rosen = |x: &[f64]| Evaluation::feasible(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let p = DfoProblem::new(rosen, vec![(-2.0, 2.0), (-2.0, 2.0)], vec![-1.2, 1.0], 2000);
        let r = minimize_dfo(&p).unwrap();
        assert!(r.cost < 1e-4, "cost {}", r.cost);
        assert!(r.evaluations <= 2000);
    }

    #[test]
    fn no_feasible_point_is_an_error() {
        let p = DfoProblem::new(|_: &[f64]| Evaluation::infeasible(0.0, 1.0), vec![(0.0, 1.0)], vec![0.5], 50);
        assert!(matches!(minimize_dfo(&p), Err(DfoError::NoFeasiblePoint { .. })));
    }

    #[test]
    fn best_of_two_starts() {
        // Two basins; the start sits in the worse one.
        let f = |x: &[f64]| Evaluation::feasible(((x[0] - 1.0).powi(2)).min((x[0] - 8.0).powi(2) - 1.0));
        let single = minimize_dfo(&DfoProblem::new(f, vec![(0.0, 10.0)], vec![0.5], 400)).unwrap();
        let multi = minimize_dfo(&DfoProblem::new(f, vec![(0.0, 10.0)], vec![0.5], 800).with_starts(2, 400, 3)).unwrap();
        let costs: Vec<f64> = multi.starts.iter().map(|s| s.best_cost).collect();
        assert_eq!(multi.cost, costs.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(multi.cost <= single.cost);
    }
}
