use std::fmt;
use std::sync::Arc;

use optim::{minimize_dfo, DfoProblem, Evaluation};
use reach::{terminal_reach, ConvergenceTest, TerminalOptions};
use serde::Serialize;
use setlib::{containment_margin, Polytope, Zonotope};
use sysmodel::LtiSystem;

use crate::{Parameter, SynthError};

type ObserverMap = dyn Fn(&[f64]) -> Result<LtiSystem, SynthError> + Send + Sync;

/// Transient-time observer design: the observer's measurement input carries
/// only the error `v ∈ V` (plant at rest, zero reference), and its estimate
/// starts anywhere in `X0`.
#[derive(Clone)]
pub struct ObserverProblem {
    pub parameters: Vec<Parameter>,
    /// `θ →` discrete observer whose inputs are the measured outputs.
    template: Arc<ObserverMap>,
    pub measurement_error: Zonotope,
    pub initial_set: Zonotope,
    /// `Y_s`, bound on the settled estimate over the observer outputs.
    pub steady_state: Polytope,
    pub terminal: TerminalOptions,
    pub tol: f64,
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl fmt::Debug for ObserverProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObserverProblem")
            .field("parameters", &self.parameters)
            .field("measurement_error", &self.measurement_error)
            .field("initial_set", &self.initial_set)
            .finish_non_exhaustive()
    }
}

impl ObserverProblem {
    pub fn new<F>(parameters: Vec<Parameter>, template: F, measurement_error: Zonotope, initial_set: Zonotope, steady_state: Polytope) -> Self
    where
        F: Fn(&[f64]) -> Result<LtiSystem, SynthError> + Send + Sync + 'static,
    {
        Self {
            parameters,
            template: Arc::new(template),
            measurement_error,
            initial_set,
            steady_state,
            terminal: TerminalOptions { test: ConvergenceTest::Settled, ..TerminalOptions::default() },
            tol: 1e-9,
            budget: 300,
            starts: 4,
            seed: 0,
        }
    }

    /// Observer with its measurement input turned into the error channel `V`.
    pub fn driven_observer(&self, theta: &[f64]) -> Result<LtiSystem, SynthError> {
        let obs = (self.template)(theta)?;
        if !obs.is_discrete() {
            return Err(SynthError::Invalid("observer must be discrete".into()));
        }
        if obs.inputs() != self.measurement_error.dim() {
            return Err(SynthError::Invalid(format!("observer has {} inputs, measurement error has dimension {}", obs.inputs(), self.measurement_error.dim())));
        }
        Ok(obs.clone().with_measurement_error(obs.d().clone(), self.measurement_error.clone())?.with_error_to_state(obs.b().clone())?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub theta: Vec<f64>,
    /// `None` when the estimate never settles.
    pub t_inf: Option<f64>,
    pub converged_at: Option<usize>,
    /// Containment margin of the settled estimate in `Y_s` (≤ 0 inside).
    pub margin: Option<f64>,
    pub spectral_radius: f64,
}

/// Settling time of the driven observer at `theta`.
pub fn transient_time(p: &ObserverProblem, theta: &[f64]) -> Result<SweepPoint, SynthError> {
    let obs = p.driven_observer(theta)?;
    let dt = obs.timing().sample_time().unwrap_or(0.0);
    let rho = obs.spectral_radius();
    match terminal_reach(&obs, &p.initial_set, &p.terminal) {
        Ok(t) => Ok(SweepPoint {
            theta: theta.to_vec(),
            t_inf: Some(t.converged_at as f64 * dt),
            converged_at: Some(t.converged_at),
            margin: Some(containment_margin(&t.output, &p.steady_state)),
            spectral_radius: rho,
        }),
        Err(reach::ReachError::NotConverged { .. }) => {
            Ok(SweepPoint { theta: theta.to_vec(), t_inf: None, converged_at: None, margin: None, spectral_radius: rho })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObserverResult {
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub t_inf: f64,
    pub converged_at: usize,
    pub margin: f64,
    pub evaluations: usize,
}

/// Minimizes the settling time `k*·Δt` of the observer estimate subject to
/// the settled estimate lying in `Y_s`. Equal step counts are ranked by the
/// spectral radius, which only breaks ties (it adds less than one step).
pub fn observer_transient_synthesis(p: &ObserverProblem) -> Result<ObserverResult, SynthError> {
    let score = |theta: &[f64]| -> Evaluation {
        match transient_time(p, theta) {
            Ok(SweepPoint { t_inf: Some(t), margin: Some(m), spectral_radius, .. }) => {
                let dt = p.driven_observer(theta).ok().and_then(|o| o.timing().sample_time()).unwrap_or(0.0);
                let cost = t + dt * spectral_radius.min(1.0);
                if m <= p.tol {
                    Evaluation::feasible(cost)
                } else {
                    Evaluation::infeasible(cost, m)
                }
            }
            Ok(point) => Evaluation::infeasible(1e9, 1.0 + point.spectral_radius),
            Err(_) => Evaluation::infeasible(f64::INFINITY, f64::INFINITY),
        }
    };
    let bounds: Vec<(f64, f64)> = p.parameters.iter().map(|q| (q.lower, q.upper)).collect();
    let start: Vec<f64> = p.parameters.iter().map(|q| q.initial.clamp(q.lower, q.upper)).collect();
    let starts = p.starts.max(1);
    let problem = DfoProblem::new(score, bounds, start, p.budget).with_starts(starts, p.budget.div_ceil(starts), p.seed);
    let best = minimize_dfo(&problem)?;
    let point = transient_time(p, &best.best)?;
    match point {
        SweepPoint { t_inf: Some(t_inf), converged_at: Some(k), margin: Some(margin), .. } if margin <= p.tol => Ok(ObserverResult {
            names: p.parameters.iter().map(|q| q.name.clone()).collect(),
            theta: best.best,
            t_inf,
            converged_at: k,
            margin,
            evaluations: best.evaluations,
        }),
        _ => Err(SynthError::NoFeasible { evaluations: best.evaluations }),
    }
}
