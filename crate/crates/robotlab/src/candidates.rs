use std::fmt;
use std::str::FromStr;

use nalgebra::{dmatrix, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setlib::Zonotope;
use sysmodel::{discretize, discretize_bilinear, series, LtiSystem, Timing};

use crate::{LabError, ObserverGains};

/// Plant model candidates for one joint.
///
/// `R` is the bare joint, `O` adds the velocity observer, `D` one sample of
/// delay on the command and on the measurement path. The suffix says whether
/// the candidate is continuous (`c`) or discretized (`d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JointModelKind {
    Rc,
    Rd,
    ROc,
    ROd,
    RDd,
    RODd,
}

impl JointModelKind {
    pub const ALL: [JointModelKind; 6] = [Self::Rc, Self::Rd, Self::ROc, Self::ROd, Self::RDd, Self::RODd];

    pub fn has_observer(self) -> bool {
        matches!(self, Self::ROc | Self::ROd | Self::RODd)
    }

    pub fn has_delay(self) -> bool {
        matches!(self, Self::RDd | Self::RODd)
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Self::Rc | Self::ROc)
    }

    /// Index of the joint velocity in the candidate state.
    pub fn velocity_state(self) -> usize {
        if self.has_delay() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for JointModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for JointModelKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| LabError::Config(format!("unknown model candidate `{s}` (expected one of Rc, Rd, ROc, ROd, RDd, RODd)")))
    }
}

/// Parameters a candidate may need; the observer only for `O` kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateParams {
    pub dt: f64,
    pub observer: Option<ObserverGains>,
}

fn unit_box(dim: usize) -> Zonotope {
    Zonotope::centered_box(DVector::zeros(dim), &vec![1.0; dim]).expect("unit box")
}

/// Continuous double integrator with `W` on both states. Observer kinds
/// measure the position only; the others see `(q, q̇)` with a 2-dim error.
fn joint(measure_velocity: bool) -> LtiSystem {
    let q = if measure_velocity { 2 } else { 1 };
    let c = if measure_velocity { DMatrix::identity(2, 2) } else { dmatrix![1.0, 0.0] };
    LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0], c, DMatrix::zeros(q, 1), Timing::Continuous)
        .and_then(|s| s.with_disturbance(DMatrix::identity(2, 2), unit_box(2)))
        .and_then(|s| s.with_measurement_error(DMatrix::identity(q, q), unit_box(q)))
        .expect("joint model is well formed")
}

/// Continuous high-gain observer: input the measured position, output and
/// state the estimate `(q̂, dq̂)`.
pub fn observer_continuous(g: &ObserverGains) -> LtiSystem {
    let (h1, h2) = g.continuous();
    LtiSystem::new(dmatrix![-h1, 1.0; -h2, 0.0], dmatrix![h1; h2], DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Continuous)
        .expect("observer model is well formed")
}

/// The observer as implemented on the controller: bilinear discretization.
pub fn observer_discrete(g: &ObserverGains, dt: f64) -> Result<LtiSystem, LabError> {
    Ok(discretize_bilinear(&observer_continuous(g), dt)?)
}

/// `x⁺ = u`, `y = x` on `width` channels.
fn unit_delay(width: usize, dt: f64) -> LtiSystem {
    LtiSystem::new(
        DMatrix::zeros(width, width),
        DMatrix::identity(width, width),
        DMatrix::identity(width, width),
        DMatrix::zeros(width, width),
        Timing::Discrete(dt),
    )
    .expect("delay block is well formed")
}

/// Composes the candidate. The chain is command delay, joint, measurement
/// delay, observer, so the state is ordered the same way; the measurement
/// delay sits in front of the observer because the observer runs on the
/// controller. Every kind maps the command `u` to an estimate of `(q, q̇)`.
pub fn build_candidate(kind: JointModelKind, params: &CandidateParams) -> Result<LtiSystem, LabError> {
    let dt = params.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(LabError::Config(format!("sample time must be positive, got {dt}")));
    }
    let obs = match (kind.has_observer(), params.observer) {
        (true, Some(g)) => Some(g),
        (true, None) => return Err(LabError::Config(format!("candidate {kind} needs observer gains"))),
        (false, _) => None,
    };
    let plant = joint(obs.is_none());
    if kind.is_continuous() {
        return Ok(match obs {
            Some(g) => series(&plant, &observer_continuous(&g))?,
            None => plant,
        });
    }
    let mut sys = discretize(&plant, dt)?;
    if kind.has_delay() {
        sys = series(&unit_delay(1, dt), &sys)?;
        sys = series(&sys, &unit_delay(sys.outputs(), dt))?;
    }
    if let Some(g) = obs {
        sys = series(&sys, &observer_discrete(&g, dt)?)?;
    }
    Ok(sys)
}

/// Discrete model used to analyse a candidate: continuous kinds are held
/// with zero-order hold at `dt`, discrete kinds are returned as built.
pub fn analysis_model(kind: JointModelKind, params: &CandidateParams) -> Result<LtiSystem, LabError> {
    let sys = build_candidate(kind, params)?;
    if sys.is_discrete() {
        Ok(sys)
    } else {
        Ok(discretize(&sys, params.dt)?)
    }
}
