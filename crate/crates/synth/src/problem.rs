use nalgebra::{DMatrix, DVector};
use optim::{minimize_dfo, DfoProblem, Evaluation, LinearProgram};
use reach::{terminal_reach, terminal_reach_constrained, ReachError, TerminalOptions, TerminalSet};
use serde::Serialize;
use setlib::{containment_margin, Interval, Polytope, Zonotope};
use sysmodel::LtiSystem;

use crate::{closed_loop, ControllerTemplate, SynthError};

/// Ranking cost for closed loops whose terminal set does not converge; the
/// constraint margin `1 + ρ(A)` then steers the search toward stability.
const DIVERGENT_COST: f64 = 1e9;

#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub plant: LtiSystem,
    pub template: ControllerTemplate,
    /// `Y_c`, over the constraint channels of the wiring.
    pub constraint: Polytope,
    /// `U_ref`, the share of the plant input reserved for the reference.
    pub reference_share: Option<Interval>,
    /// `U_p`, the admissible plant input; the constraint channels start with `u_p`.
    pub input_limits: Option<Interval>,
    /// Initial set of the plant state or of the full closed-loop state; origin when absent.
    pub initial_set: Option<Zonotope>,
    pub terminal: TerminalOptions,
    /// Absolute containment tolerance.
    pub tol: f64,
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl SynthesisProblem {
    pub fn new(plant: LtiSystem, template: ControllerTemplate, constraint: Polytope) -> Self {
        Self {
            plant,
            template,
            constraint,
            reference_share: None,
            input_limits: None,
            initial_set: None,
            terminal: TerminalOptions::default(),
            tol: 1e-9,
            budget: 200,
            starts: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !self.plant.is_discrete() {
            return Err(SynthError::Invalid("synthesis needs a discrete-time plant".into()));
        }
        let w = &self.template.wiring;
        if self.constraint.dim() != w.constrained.nrows() {
            return Err(SynthError::Invalid(format!(
                "constraint set has dimension {}, wiring exposes {} constraint channels",
                self.constraint.dim(),
                w.constrained.nrows()
            )));
        }
        if let (Some(u_ref), Some(u_p)) = (&self.reference_share, &self.input_limits) {
            self.check_input_budget(u_ref, u_p)?;
        }
        Ok(())
    }

    /// `U_ref ⊕ Y_c ⊆ U_p` on the leading `u_p` constraint channels.
    fn check_input_budget(&self, u_ref: &Interval, u_p: &Interval) -> Result<(), SynthError> {
        let m = u_p.dim();
        if u_ref.dim() != m || self.constraint.dim() < m {
            return Err(SynthError::Invalid("input limits, reference share and constraint channels disagree in size".into()));
        }
        for i in 0..m {
            let hi = polytope_support(&self.constraint, i, 1.0)?;
            let lo = -polytope_support(&self.constraint, i, -1.0)?;
            let slack = 1e-9 * (1.0 + u_p.upper()[i].abs().max(u_p.lower()[i].abs()));
            if hi + u_ref.upper()[i] > u_p.upper()[i] + slack || lo + u_ref.lower()[i] < u_p.lower()[i] - slack {
                return Err(SynthError::Invalid(format!(
                    "input channel {i}: reference share plus controller share [{}, {}] exceeds the input limits [{}, {}]",
                    lo + u_ref.lower()[i],
                    hi + u_ref.upper()[i],
                    u_p.lower()[i],
                    u_p.upper()[i]
                )));
            }
        }
        Ok(())
    }

    fn initial_state(&self, order: usize) -> Result<Zonotope, SynthError> {
        let n_p = self.plant.order();
        match &self.initial_set {
            None => Ok(Zonotope::origin(order)),
            Some(z) if z.dim() == order => Ok(z.clone()),
            Some(z) if z.dim() == n_p => Ok(z.cartesian_product(&Zonotope::origin(order - n_p))),
            Some(z) => Err(SynthError::Invalid(format!("initial set has dimension {}, expected {n_p} or {order}", z.dim()))),
        }
    }

    fn tracking_rows(&self) -> usize {
        self.template.wiring.tracking.nrows()
    }

    /// `Y_c` lifted to the closed-loop outputs `[y_z; y_con]`.
    fn lifted_constraint(&self) -> Result<Polytope, SynthError> {
        let nz = self.tracking_rows();
        let normals = self.constraint.normals();
        let mut lifted = DMatrix::zeros(normals.nrows(), nz + normals.ncols());
        lifted.view_mut((0, nz), normals.shape()).copy_from(normals);
        Ok(Polytope::new(lifted, self.constraint.offsets().clone())?)
    }
}

/// `max e_i·s` (times `sign`) over the polytope.
fn polytope_support(p: &Polytope, i: usize, sign: f64) -> Result<f64, SynthError> {
    let mut cost = DVector::zeros(p.dim());
    cost[i] = -sign;
    let lp = LinearProgram {
        cost,
        rows: p.normals().clone(),
        rhs: p.offsets().clone(),
        lower: DVector::from_element(p.dim(), f64::NEG_INFINITY),
        upper: DVector::from_element(p.dim(), f64::INFINITY),
    };
    match optim::solve_lp(&lp) {
        Ok(s) => Ok(-s.cost),
        Err(optim::LpError::Unbounded) => Ok(f64::INFINITY),
        Err(e) => Err(SynthError::Invalid(format!("constraint set support: {e}"))),
    }
}

/// One scored parameter vector.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub theta: Vec<f64>,
    pub closed_loop: LtiSystem,
    pub terminal: TerminalSet,
    /// Interval-hull side sum of the terminal tracking set.
    pub cost: f64,
    /// Worst constraint margin over `R_con[0..=k*]`; positive means violated.
    pub margin: f64,
}

pub fn evaluate(p: &SynthesisProblem, theta: &[f64]) -> Result<Candidate, SynthError> {
    let controller = p.template.controller(theta)?;
    let cl = closed_loop(&p.plant, &controller, &p.template.wiring)?;
    let x0 = p.initial_state(cl.order())?;
    let terminal = terminal_reach_constrained(&cl, &x0, &p.terminal, &p.lifted_constraint()?)?;
    let cost = tracking_cost(&terminal.output, p.tracking_rows())?;
    let margin = terminal.constraint_margin.unwrap_or(f64::NEG_INFINITY);
    Ok(Candidate { theta: theta.to_vec(), closed_loop: cl, terminal, cost, margin })
}

fn tracking_cost(output: &Zonotope, nz: usize) -> Result<f64, SynthError> {
    let select = DMatrix::identity(nz, output.dim());
    Ok(output.linear_map(&select)?.hull_side_sum())
}

pub(crate) fn score(p: &SynthesisProblem, theta: &[f64]) -> Evaluation {
    match evaluate(p, theta) {
        Ok(c) if c.margin <= p.tol => Evaluation::feasible(c.cost),
        Ok(c) => Evaluation::infeasible(c.cost, c.margin),
        Err(SynthError::Reach(ReachError::NotConverged { .. })) => {
            let rho = p
                .template
                .controller(theta)
                .and_then(|k| closed_loop(&p.plant, &k, &p.template.wiring))
                .map(|cl| cl.spectral_radius())
                .unwrap_or(f64::INFINITY);
            Evaluation::infeasible(DIVERGENT_COST, 1.0 + rho)
        }
        Err(_) => Evaluation::infeasible(f64::INFINITY, f64::INFINITY),
    }
}

/// Post-hoc check of a parameter vector, independent of the search bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    /// Containment margin of `R_con[k]` in `Y_c` for `k = 0..=k*`.
    pub margins: Vec<f64>,
    pub max_margin: f64,
    /// Tracking cost recomputed from a fresh terminal-set run.
    pub cost: f64,
    pub converged_at: usize,
    pub passed: bool,
}

pub fn verify(p: &SynthesisProblem, theta: &[f64]) -> Result<Verification, SynthError> {
    let controller = p.template.controller(theta)?;
    let cl = closed_loop(&p.plant, &controller, &p.template.wiring)?;
    let x0 = p.initial_state(cl.order())?;
    let terminal = terminal_reach(&cl, &x0, &p.terminal)?;
    let cost = tracking_cost(&terminal.output, p.tracking_rows())?;
    let k_star = terminal.converged_at;
    let zero = DMatrix::zeros(cl.inputs(), k_star + 1);
    let tube = reach::reach_horizon(&cl, &x0, &zero, k_star)?;
    let nz = p.tracking_rows();
    let ncon = p.constraint.dim();
    let mut select = DMatrix::zeros(ncon, cl.outputs());
    select.view_mut((0, nz), (ncon, ncon)).fill_with_identity();
    let margins = tube.sets.iter().map(|r| Ok(containment_margin(&r.linear_map(&select)?, &p.constraint))).collect::<Result<Vec<f64>, SynthError>>()?;
    let max_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Verification { passed: max_margin <= p.tol, margins, max_margin, cost, converged_at: k_star })
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthResult {
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub cost: f64,
    /// Convergence step of the terminal set and its time `k*·Δt`.
    pub converged_at: usize,
    pub t_inf: f64,
    pub verification: Verification,
    pub evaluations: usize,
}

/// Minimizes the terminal tracking set over the template parameters subject
/// to `R_con[k] ⊆ Y_c` up to convergence.
pub fn synth_controller(p: &SynthesisProblem) -> Result<SynthResult, SynthError> {
    p.validate()?;
    let bounds = p.template.bounds();
    let starts = p.starts.max(1);
    let problem =
        DfoProblem::new(|theta: &[f64]| score(p, theta), bounds, p.template.initial(), p.budget).with_starts(starts, p.budget.div_ceil(starts), p.seed);
    let best = minimize_dfo(&problem)?;
    finish(p, best.best, best.evaluations)
}

pub(crate) fn finish(p: &SynthesisProblem, theta: Vec<f64>, evaluations: usize) -> Result<SynthResult, SynthError> {
    let verification = verify(p, &theta)?;
    if !verification.passed {
        return Err(SynthError::NoFeasible { evaluations });
    }
    let dt = p.plant.timing().sample_time().unwrap_or(0.0);
    Ok(SynthResult {
        names: p.template.names(),
        cost: verification.cost,
        converged_at: verification.converged_at,
        t_inf: verification.converged_at as f64 * dt,
        theta,
        verification,
        evaluations,
    })
}
