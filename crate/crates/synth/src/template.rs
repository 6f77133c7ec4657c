use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use sysmodel::{LtiSystem, Timing};

use crate::SynthError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

impl Parameter {
    pub fn new(name: &str, lower: f64, upper: f64, initial: f64) -> Self {
        Self { name: name.to_string(), lower, upper, initial }
    }
}

/// How a controller is connected to a plant.
///
/// With plant signals `s = [y_p; x_p; u_p]` and controller output `y_c`:
/// the controller reads `u_c = measure · s`, the plant receives
/// `u_p = u_ref + actuate · y_c`, and the closed loop reports
/// `[y_z; y_con] = [tracking; constrained] · [s; y_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wiring {
    pub measure: DMatrix<f64>,
    pub actuate: DMatrix<f64>,
    pub tracking: DMatrix<f64>,
    pub constrained: DMatrix<f64>,
}

impl Wiring {
    /// Controller reads all plant outputs and drives every plant input;
    /// tracking channels are the plant outputs and the constraint channels the plant inputs.
    pub fn output_feedback(plant: &LtiSystem) -> Self {
        let (q, n, m) = (plant.outputs(), plant.order(), plant.inputs());
        let signals = q + n + m;
        let measure = DMatrix::identity(q, signals);
        let mut tracking = DMatrix::zeros(q, signals + m);
        tracking.view_mut((0, 0), (q, q)).fill_with_identity();
        let mut constrained = DMatrix::zeros(m, signals + m);
        constrained.view_mut((0, q + n), (m, m)).fill_with_identity();
        Self { measure, actuate: DMatrix::identity(m, m), tracking, constrained }
    }

    /// Like [`Wiring::output_feedback`] but the controller reads the plant state.
    pub fn state_feedback(plant: &LtiSystem) -> Self {
        let (q, n) = (plant.outputs(), plant.order());
        let mut w = Self::output_feedback(plant);
        let mut measure = DMatrix::zeros(n, w.measure.ncols());
        measure.view_mut((0, q), (n, n)).fill_with_identity();
        w.measure = measure;
        w
    }

    /// Adds the selected plant states to the constraint channels (after `u_p`).
    pub fn constrain_states(mut self, plant: &LtiSystem, states: &[usize]) -> Self {
        let q = plant.outputs();
        let extra = DMatrix::from_fn(states.len(), self.constrained.ncols(), |r, c| if c == q + states[r] { 1.0 } else { 0.0 });
        let rows = self.constrained.nrows();
        self.constrained = self.constrained.resize_vertically(rows + states.len(), 0.0);
        self.constrained.view_mut((rows, 0), extra.shape()).copy_from(&extra);
        self
    }

    pub(crate) fn check(&self, plant: &LtiSystem, controller: &LtiSystem) -> Result<(), SynthError> {
        let signals = plant.outputs() + plant.order() + plant.inputs();
        let bad = |what: &str, found: (usize, usize), expected: (usize, usize)| {
            Err(SynthError::Invalid(format!("wiring {what} is {}×{}, expected {}×{}", found.0, found.1, expected.0, expected.1)))
        };
        if self.measure.shape() != (controller.inputs(), signals) {
            return bad("measure", self.measure.shape(), (controller.inputs(), signals));
        }
        if self.actuate.shape() != (plant.inputs(), controller.outputs()) {
            return bad("actuate", self.actuate.shape(), (plant.inputs(), controller.outputs()));
        }
        for (what, m) in [("tracking", &self.tracking), ("constrained", &self.constrained)] {
            if m.ncols() != signals + controller.outputs() {
                return bad(what, m.shape(), (m.nrows(), signals + controller.outputs()));
            }
        }
        Ok(())
    }
}

type ControllerMap = dyn Fn(&[f64]) -> Result<LtiSystem, SynthError> + Send + Sync;

/// A parametrized controller: box-bounded parameters and a pure map to a
/// controller system, plus its wiring to the plant.
#[derive(Clone)]
pub struct ControllerTemplate {
    pub parameters: Vec<Parameter>,
    pub wiring: Wiring,
    map: Arc<ControllerMap>,
}

impl fmt::Debug for ControllerTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControllerTemplate").field("parameters", &self.parameters).field("wiring", &self.wiring).finish_non_exhaustive()
    }
}

impl ControllerTemplate {
    pub fn new<F>(parameters: Vec<Parameter>, wiring: Wiring, map: F) -> Self
    where
        F: Fn(&[f64]) -> Result<LtiSystem, SynthError> + Send + Sync + 'static,
    {
        Self { parameters, wiring, map: Arc::new(map) }
    }

    /// Static gain `y_c = gain(θ) · u_c`, the memoryless special case.
    pub fn static_gain<F>(parameters: Vec<Parameter>, wiring: Wiring, timing: Timing, gain: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::new(parameters, wiring, move |theta| Ok(LtiSystem::static_gain(gain(theta), timing)?))
    }

    pub fn controller(&self, theta: &[f64]) -> Result<LtiSystem, SynthError> {
        if theta.len() != self.parameters.len() {
            return Err(SynthError::Invalid(format!("{} parameters given, template has {}", theta.len(), self.parameters.len())));
        }
        (self.map)(theta)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.parameters.iter().map(|p| (p.lower, p.upper)).collect()
    }

    pub fn initial(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.initial.clamp(p.lower, p.upper)).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }
}
