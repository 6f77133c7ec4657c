use std::fmt;
use std::str::FromStr;

use conform::IdentOptions;
use nalgebra::{dmatrix, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setlib::{Interval, Polytope, Zonotope};
use synth::{ControllerTemplate, IdentSetup, ObserverProblem, Parameter, SynthError, SynthesisProblem, Wiring};
use sysmodel::{series, LtiSystem, TestSuite, Timing};

use crate::candidates::{analysis_model, observer_discrete, CandidateParams, JointModelKind};
use crate::{gen_references, project_suite, simulate_suite, ControllerGains, JointPlantSim, LabConfig, LabError, ObserverGains, ReferenceConfig};

/// Which loop parameters are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// PD gains `(ω, ζ)` acting on the estimate.
    StateFeedback,
    /// Observer gains `(h̃₁, h̃₂)` minimizing the velocity-estimate error in
    /// the closed loop with the configured PD gains.
    ObserverA1,
    /// Observer gains minimizing the transient time of the observer alone.
    ObserverA2,
    /// PD and observer gains together, the observer reading the position.
    OutputFeedback,
}

impl fmt::Display for SynthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthMode::StateFeedback => "state-feedback",
            SynthMode::ObserverA1 => "observer-a1",
            SynthMode::ObserverA2 => "observer-a2",
            SynthMode::OutputFeedback => "output-feedback",
        })
    }
}

impl FromStr for SynthMode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        [SynthMode::StateFeedback, SynthMode::ObserverA1, SynthMode::ObserverA2, SynthMode::OutputFeedback]
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| LabError::Config(format!("unknown synthesis mode `{s}`")))
    }
}

pub fn candidate_params(cfg: &LabConfig) -> CandidateParams {
    CandidateParams { dt: cfg.dt, observer: Some(cfg.observer) }
}

/// Identification options of the lab: horizon and windows from the config,
/// noise sets centered at the origin.
pub fn ident_options(cfg: &LabConfig, model: &LtiSystem) -> IdentOptions {
    IdentOptions { sliding: cfg.sliding, ..IdentOptions::with_horizon(cfg.ident_horizon) }.centered(model)
}

fn pd_parameters(cfg: &LabConfig) -> Vec<Parameter> {
    vec![Parameter::new("omega", 1.0, 100.0, cfg.gains.omega), Parameter::new("zeta", 0.3, 1.0, cfg.gains.zeta)]
}

fn observer_parameters(cfg: &LabConfig) -> Vec<Parameter> {
    vec![Parameter::new("h1", 1.0, 40.0, cfg.observer.h1), Parameter::new("h2", 1.0, 120.0, cfg.observer.h2)]
}

fn pd_row(g: ControllerGains) -> DMatrix<f64> {
    dmatrix![-g.kp(), -g.kd()]
}

/// Observer on the measured position followed by the PD law; outputs
/// `[u; q̂; dq̂]` so the estimate stays visible to the wiring.
fn observer_pd(obs: ObserverGains, g: ControllerGains, dt: f64) -> Result<LtiSystem, SynthError> {
    let o = observer_discrete(&obs, dt).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let mut out = DMatrix::zeros(3, 2);
    out.view_mut((0, 0), (1, 2)).copy_from(&pd_row(g));
    out.view_mut((1, 0), (2, 2)).fill_with_identity();
    Ok(series(&o, &LtiSystem::static_gain(out, Timing::Discrete(dt))?)?)
}

/// A synthesis problem on a lab candidate plus how its uncertainty is
/// identified. The plant's `W` and `V` are placeholders until identified.
#[derive(Debug, Clone)]
pub struct LabDesign {
    pub mode: SynthMode,
    pub kind: JointModelKind,
    pub problem: SynthesisProblem,
    pub setup: IdentSetup,
}

/// Wiring for a controller that reads the measured position (plant output 0)
/// and returns `[u; q̂; dq̂]`.
fn observer_wiring(plant: &LtiSystem, tracking: DMatrix<f64>) -> Wiring {
    let (q, n, m) = (plant.outputs(), plant.order(), plant.inputs());
    let signals = q + n + m;
    let mut measure = DMatrix::zeros(1, signals);
    measure[(0, 0)] = 1.0;
    let mut constrained = DMatrix::zeros(m, signals + 3);
    constrained.view_mut((0, q + n), (m, m)).fill_with_identity();
    Wiring { measure, actuate: dmatrix![1.0, 0.0, 0.0], tracking, constrained }
}

pub fn lab_design(cfg: &LabConfig, mode: SynthMode, kind: JointModelKind) -> Result<LabDesign, LabError> {
    cfg.validate()?;
    let plant = analysis_model(kind, &candidate_params(cfg))?;
    let (q, n, m) = (plant.outputs(), plant.order(), plant.inputs());
    let signals = q + n + m;
    let dt = cfg.dt;
    let feedback = Polytope::from_interval(&Interval::symmetric(&[cfg.feedback_limit()])?);
    let needs_bare = matches!(mode, SynthMode::ObserverA1 | SynthMode::OutputFeedback);
    if needs_bare && kind.has_observer() {
        return Err(LabError::Config(format!("mode {mode} builds its own observer; pick a candidate without one (Rd, RDd)")));
    }
    let template = match mode {
        SynthMode::StateFeedback => ControllerTemplate::static_gain(pd_parameters(cfg), Wiring::output_feedback(&plant), Timing::Discrete(dt), |t| {
            pd_row(ControllerGains { omega: t[0], zeta: t[1] })
        }),
        SynthMode::ObserverA1 => {
            // Velocity estimation error: true joint velocity minus dq̂.
            let mut tracking = DMatrix::zeros(1, signals + 3);
            tracking[(0, q + kind.velocity_state())] = 1.0;
            tracking[(0, signals + 2)] = -1.0;
            let (gains, eps) = (cfg.gains, cfg.observer.eps);
            ControllerTemplate::new(observer_parameters(cfg), observer_wiring(&plant, tracking), move |t| {
                observer_pd(ObserverGains { h1: t[0], h2: t[1], eps }, gains, dt)
            })
        }
        SynthMode::OutputFeedback => {
            let mut tracking = DMatrix::zeros(q, signals + 3);
            tracking.view_mut((0, 0), (q, q)).fill_with_identity();
            let mut params = pd_parameters(cfg);
            params.extend(observer_parameters(cfg));
            let eps = cfg.observer.eps;
            ControllerTemplate::new(params, observer_wiring(&plant, tracking), move |t| {
                observer_pd(ObserverGains { h1: t[2], h2: t[3], eps }, ControllerGains { omega: t[0], zeta: t[1] }, dt)
            })
        }
        SynthMode::ObserverA2 => return Err(LabError::Config("observer-a2 needs no plant model; use observer_a2_problem".into())),
    };
    // Approach 1 leaves the command unconstrained: a polytope without rows.
    let constraint = if mode == SynthMode::ObserverA1 { Polytope::new(DMatrix::zeros(0, 1), DVector::zeros(0))? } else { feedback };
    let mut problem = SynthesisProblem::new(plant.clone(), template, constraint);
    if mode != SynthMode::ObserverA1 {
        problem.reference_share = Some(Interval::symmetric(&[cfg.reference_limit])?);
        problem.input_limits = Some(Interval::symmetric(&[cfg.input_limit()])?);
    }
    problem.seed = cfg.seed;
    let setup = IdentSetup::new(plant.clone(), ident_options(cfg, &plant));
    Ok(LabDesign { mode, kind, problem, setup })
}

/// Observer transient design: measurement error `±1` millidegree, initial
/// estimate error in `[−0.1, 0.1]²`, settled `dq̂` error within `±0.005`.
pub fn observer_a2_problem(cfg: &LabConfig) -> Result<ObserverProblem, LabError> {
    cfg.validate()?;
    let (dt, eps) = (cfg.dt, cfg.observer.eps);
    let v = Zonotope::centered_box(DVector::zeros(1), &[1e-3f64.to_radians()])?;
    let x0 = Zonotope::centered_box(DVector::zeros(2), &[0.1, 0.1])?;
    let settled = Polytope::new(dmatrix![0.0, 1.0; 0.0, -1.0], DVector::from_vec(vec![0.005, 0.005]))?;
    let mut p = ObserverProblem::new(
        observer_parameters(cfg),
        move |t| observer_discrete(&ObserverGains { h1: t[0], h2: t[1], eps }, dt).map_err(|e| SynthError::Invalid(e.to_string())),
        v,
        x0,
        settled,
    );
    p.seed = cfg.seed;
    Ok(p)
}

/// Loop gains a mode's parameter vector stands for.
pub fn loop_gains(cfg: &LabConfig, mode: SynthMode, theta: &[f64]) -> (ControllerGains, ObserverGains) {
    let eps = cfg.observer.eps;
    match mode {
        SynthMode::StateFeedback => (ControllerGains { omega: theta[0], zeta: theta[1] }, cfg.observer),
        SynthMode::ObserverA1 | SynthMode::ObserverA2 => (cfg.gains, ObserverGains { h1: theta[0], h2: theta[1], eps }),
        SynthMode::OutputFeedback => (ControllerGains { omega: theta[0], zeta: theta[1] }, ObserverGains { h1: theta[2], h2: theta[3], eps }),
    }
}

/// Identification data: the configured references under the configured gains,
/// in the coordinates of `kind`.
pub fn initial_suite(cfg: &LabConfig, kind: JointModelKind) -> Result<TestSuite, LabError> {
    let sim = JointPlantSim::from_config(cfg)?;
    let refs = gen_references(cfg.seed, &cfg.references, cfg.dt);
    project_suite(&simulate_suite(&sim, &refs, cfg.gains)?, kind)
}

/// Fresh validation data for iteration `iteration` under the loop described
/// by `theta`: new references and noise, seeded from the config seed.
pub fn validation_suite(cfg: &LabConfig, mode: SynthMode, kind: JointModelKind, iteration: usize, theta: &[f64]) -> Result<TestSuite, LabError> {
    let seed = cfg.seed ^ (0x5eed_0000 + iteration as u64);
    let (gains, observer) = loop_gains(cfg, mode, theta);
    let sim = JointPlantSim { observer, seed, ..JointPlantSim::from_config(cfg)? };
    let refs = gen_references(seed, &ReferenceConfig { count: cfg.validation_runs, ..cfg.references.clone() }, cfg.dt);
    project_suite(&simulate_suite(&sim, &refs, gains)?, kind)
}
