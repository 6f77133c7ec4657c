use nalgebra::{DMatrix, DVector};
use setlib::{Polytope, Zonotope};
use sysmodel::LtiSystem;

use crate::ReachError;

/// When the zero-input state recursion counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum ConvergenceTest {
    /// Hull of `X[k+1]` inside the hull of `X[k]` inflated by the tolerance.
    /// Fires immediately for a shrinking initial set.
    #[default]
    Containment,
    /// Hulls of `X[k]` and `X[k+1]` agree to the tolerance on every bound.
    /// Suited to transients that start from a large initial set.
    Settled,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TerminalOptions {
    /// Tolerance relative to the hull `znorm` of `X[k]`.
    pub rel_tol: f64,
    pub k_max: usize,
    pub test: ConvergenceTest,
    /// Accumulated noise is replaced by its interval hull every
    /// `collapse_every` steps once `k ≥ collapse_after` (outer approximation).
    pub collapse_after: usize,
    pub collapse_every: usize,
}

impl Default for TerminalOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-6, k_max: 500, test: ConvergenceTest::Containment, collapse_after: 500, collapse_every: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct TerminalSet {
    /// Output set `C X[k*] ⊕ F V` at the converged step.
    pub output: Zonotope,
    pub state: Zonotope,
    pub converged_at: usize,
    /// `max_{k ≤ k*}` of the output containment margin, when a constraint was given.
    pub constraint_margin: Option<f64>,
    /// Step attaining `constraint_margin`.
    pub worst_step: Option<usize>,
}

/// Zero-input reachable set iterated until it stops growing.
pub fn terminal_reach(sys: &LtiSystem, x0: &Zonotope, opts: &TerminalOptions) -> Result<TerminalSet, ReachError> {
    run(sys, x0, opts, None)
}

/// Like [`terminal_reach`], also tracking the worst containment margin of the
/// output sets `R[0..=k*]` in `constraint` (positive means violated).
pub fn terminal_reach_constrained(sys: &LtiSystem, x0: &Zonotope, opts: &TerminalOptions, constraint: &Polytope) -> Result<TerminalSet, ReachError> {
    if constraint.dim() != sys.outputs() {
        return Err(ReachError::Invalid(format!("constraint has dimension {}, system has {} outputs", constraint.dim(), sys.outputs())));
    }
    run(sys, x0, opts, Some(constraint))
}

fn abs_row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| m.row(i).iter().map(|v| v.abs()).sum())
}

/// State set `X[k] = Aᵏ X0 ⊕ N_k` with the noise part `N_k = ⊕_{i<k} Aⁱ Ẽ H`
/// kept as an explicit generator list plus running hull and support sums.
struct Accumulator {
    free: Zonotope,
    center: DVector<f64>,
    gens: Vec<DMatrix<f64>>,
    half_widths: DVector<f64>,
    /// `Σ |n_r C g|` over noise generators, per constraint row.
    spread: DVector<f64>,
}

impl Accumulator {
    fn hull(&self) -> (DVector<f64>, DVector<f64>) {
        let c = self.free.center() + &self.center;
        let hw = self.free.half_widths() + &self.half_widths;
        (&c - &hw, c + hw)
    }

    fn state(&self) -> Result<Zonotope, ReachError> {
        let n = self.center.len();
        let cols: usize = self.gens.iter().map(|g| g.ncols()).sum();
        let mut g = DMatrix::zeros(n, cols);
        let mut at = 0;
        for b in &self.gens {
            g.columns_mut(at, b.ncols()).copy_from(b);
            at += b.ncols();
        }
        Ok(self.free.minkowski_sum(&Zonotope::from_generators(self.center.clone(), g)?)?)
    }
}

fn run(sys: &LtiSystem, x0: &Zonotope, opts: &TerminalOptions, constraint: Option<&Polytope>) -> Result<TerminalSet, ReachError> {
    if !sys.is_discrete() {
        return Err(sysmodel::SysError::NotDiscrete.into());
    }
    let n = sys.order();
    if x0.dim() != n {
        return Err(ReachError::Invalid(format!("initial set has dimension {}, system order is {n}", x0.dim())));
    }
    let noise = sys.noise_set();
    let h_gens = noise.generators();
    let h_center = noise.center().clone();
    let to_state = sys.noise_to_state();
    let v_out = sys.v().linear_map(sys.f())?;

    // Constraint rows pulled back to the state: n_r C, plus the fixed F V part.
    let rows = constraint.map(|p| {
        let nc = p.normals() * sys.c();
        let v_spread = abs_row_sums(&(p.normals() * v_out.generators()));
        let v_center = p.normals() * v_out.center();
        (p, nc, v_spread, v_center)
    });
    let r = rows.as_ref().map_or(0, |(p, ..)| p.num_rows());

    let mut acc = Accumulator { free: x0.clone(), center: DVector::zeros(n), gens: Vec::new(), half_widths: DVector::zeros(n), spread: DVector::zeros(r) };
    let mut power_map = to_state.clone();
    let mut worst: Option<(f64, usize)> = None;
    let mut growth = f64::INFINITY;

    for k in 0..=opts.k_max {
        if let Some((p, nc, v_spread, v_center)) = &rows {
            let fg = nc * acc.free.generators();
            let fc = nc * (acc.free.center() + &acc.center);
            let margin = (0..p.num_rows())
                .map(|j| {
                    let spread: f64 = fg.row(j).iter().map(|v| v.abs()).sum::<f64>() + acc.spread[j] + v_spread[j];
                    fc[j] + v_center[j] + spread - p.offsets()[j]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if worst.is_none_or(|(m, _)| margin > m || margin.is_nan()) {
                worst = Some((margin, k));
            }
        }
        let (lo, hi) = acc.hull();
        let tol = opts.rel_tol * (&hi - &lo).sum() / 2.0 + 1e-15;

        let snapshot = acc.gens.len();
        let saved = (acc.free.clone(), acc.center.clone(), acc.half_widths.clone(), acc.spread.clone());
        let block = &power_map * &h_gens;
        acc.center += &power_map * &h_center;
        acc.half_widths += abs_row_sums(&block);
        if let Some((_, nc, ..)) = &rows {
            acc.spread += abs_row_sums(&(nc * &block));
        }
        acc.gens.push(block);
        acc.free = acc.free.linear_map(sys.a())?;
        power_map = sys.a() * power_map;

        let (lo2, hi2) = acc.hull();
        if !(lo2.iter().chain(hi2.iter()).all(|v| v.is_finite())) {
            return Err(ReachError::NotConverged { k_max: k, growth: f64::INFINITY });
        }
        let down = (&lo - &lo2).max();
        let up = (&hi2 - &hi).max();
        growth = down.max(up);
        let converged = match opts.test {
            ConvergenceTest::Containment => down <= tol && up <= tol,
            ConvergenceTest::Settled => (&lo - &lo2).amax() <= tol && (&hi2 - &hi).amax() <= tol,
        };
        if converged {
            acc.gens.truncate(snapshot);
            (acc.free, acc.center, acc.half_widths, acc.spread) = saved;
            let state = acc.state()?;
            let output = state.linear_map(sys.c())?.minkowski_sum(&v_out)?;
            return Ok(TerminalSet { output, state, converged_at: k, constraint_margin: worst.map(|w| w.0), worst_step: worst.map(|w| w.1) });
        }

        let next = k + 1;
        if next >= opts.collapse_after && opts.collapse_every > 0 && (next - opts.collapse_after).is_multiple_of(opts.collapse_every) {
            collapse(&mut acc, rows.as_ref().map(|(_, nc, ..)| nc));
        }
    }
    Err(ReachError::NotConverged { k_max: opts.k_max, growth })
}

/// Replaces the accumulated noise generators by their interval hull.
fn collapse(acc: &mut Accumulator, nc: Option<&DMatrix<f64>>) {
    let hw = &acc.half_widths;
    let keep: Vec<usize> = (0..hw.len()).filter(|&i| hw[i] > 0.0).collect();
    let mut g = DMatrix::zeros(hw.len(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        g[(i, col)] = hw[i];
    }
    if let Some(nc) = nc {
        acc.spread = abs_row_sums(&(nc * &g));
    }
    acc.gens = vec![g];
}
