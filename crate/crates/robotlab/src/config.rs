use serde::{Deserialize, Serialize};

use crate::LabError;

/// State-feedback gains as natural frequency and damping:
/// `k_p = ω²`, `k_d = 2ζω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub omega: f64,
    pub zeta: f64,
}

impl ControllerGains {
    pub fn kp(&self) -> f64 {
        self.omega * self.omega
    }

    pub fn kd(&self) -> f64 {
        2.0 * self.zeta * self.omega
    }
}

/// High-gain observer tuning; the continuous gains are `h̃₁/ε` and `h̃₂/ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub h1: f64,
    pub h2: f64,
    pub eps: f64,
}

impl ObserverGains {
    pub fn continuous(&self) -> (f64, f64) {
        (self.h1 / self.eps, self.h2 / (self.eps * self.eps))
    }
}

/// What the synthetic plant injects and how the loop is wired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Half-widths of the box `W_true` acting on `(q, q̇)`, continuous units.
    pub disturbance: [f64; 2],
    /// Half-width of the additive encoder noise, on top of quantization.
    pub encoder_noise: f64,
    /// Encoder resolution in radians; 0 disables quantization.
    pub quantization: f64,
    /// Samples of delay on the command path (0 or 1).
    pub input_delay: usize,
    /// Samples of delay on the measurement path (0 or 1).
    pub output_delay: usize,
    /// Share of noise draws placed at a vertex of the noise box.
    pub vertex_fraction: f64,
    /// Time constant of the first-order lag between command and joint
    /// acceleration, seconds; 0 disables it. No candidate models it.
    pub actuator_lag: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { disturbance: [0.005, 3.0], encoder_noise: 2e-6, quantization: 5e-6, input_delay: 1, output_delay: 1, vertex_fraction: 0.2, actuator_lag: 0.004 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub count: usize,
    /// Seconds per trajectory.
    pub duration: f64,
    pub max_velocity: f64,
    pub max_acceleration: f64,
    /// Largest distance between consecutive targets.
    pub max_step: f64,
    /// Longest rest between motions, seconds.
    pub max_dwell: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { count: 12, duration: 8.0, max_velocity: 1.5, max_acceleration: 3.0, max_step: 1.0, max_dwell: 0.4 }
    }
}

/// Every constant of the synthetic lab. Serialized as the lab config JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub dt: f64,
    /// Joint under study, 1-based.
    pub axis: usize,
    pub gains: ControllerGains,
    pub observer: ObserverGains,
    /// Peak motor torques per joint.
    pub tau_max: Vec<f64>,
    /// Half-widths of `U_p` per joint, fitted offline from the torque limits.
    pub input_limits: Vec<f64>,
    /// Half-width of `U_ref`, the acceleration reserved for the reference.
    pub reference_limit: f64,
    pub plant: PlantConfig,
    pub references: ReferenceConfig,
    /// Trajectories recorded per validation run of the iterative loop.
    pub validation_runs: usize,
    /// Identification horizon in steps.
    pub ident_horizon: usize,
    pub sliding: bool,
    pub seed: u64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            dt: 0.004,
            axis: 1,
            gains: ControllerGains { omega: 20.0, zeta: 0.65 },
            observer: ObserverGains { h1: 15.0, h2: 30.0, eps: 0.01 },
            tau_max: vec![75.5, 75.5, 75.5, 75.5, 20.0, 20.0],
            input_limits: vec![20.0, 7.27, 20.0, 20.0, 20.0, 20.0],
            reference_limit: 3.0,
            plant: PlantConfig::default(),
            references: ReferenceConfig::default(),
            validation_runs: 2,
            ident_horizon: 10,
            sliding: true,
            seed: 0,
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.axis == 0 || self.axis > self.input_limits.len() {
            return bad(format!("axis {} outside 1..={}", self.axis, self.input_limits.len()));
        }
        if self.input_limits.iter().any(|&u| !(u > 0.0)) || self.reference_limit < 0.0 {
            return bad("input limits must be positive and the reference share non-negative".into());
        }
        if self.input_limit() <= self.reference_limit {
            return bad(format!("U_ref half-width {} leaves no room inside U_p {}", self.reference_limit, self.input_limit()));
        }
        let o = &self.observer;
        if !(o.h1 > 0.0 && o.h2 > 0.0 && o.eps > 0.0) {
            return bad("observer gains and ε must be positive".into());
        }
        let p = &self.plant;
        if p.disturbance.iter().any(|&w| !(w >= 0.0)) || !(p.encoder_noise >= 0.0) || !(p.quantization >= 0.0) || !(p.actuator_lag >= 0.0) {
            return bad("noise magnitudes must be non-negative".into());
        }
        if p.input_delay > 1 || p.output_delay > 1 {
            return bad("delays are limited to one sample per direction".into());
        }
        if !(0.0..=1.0).contains(&p.vertex_fraction) {
            return bad("vertex fraction must lie in [0, 1]".into());
        }
        let r = &self.references;
        if !(r.max_velocity > 0.0 && r.max_acceleration > 0.0 && r.max_step > 0.0) || r.duration < 0.0 || r.max_dwell < 0.0 {
            return bad("reference caps must be positive".into());
        }
        if r.max_acceleration > self.reference_limit {
            return bad(format!("reference acceleration cap {} exceeds U_ref {}", r.max_acceleration, self.reference_limit));
        }
        if self.validation_runs == 0 {
            return bad("validation needs at least one trajectory".into());
        }
        if self.ident_horizon == 0 {
            return bad("identification horizon must be at least one step".into());
        }
        Ok(())
    }

    /// Half-width of `U_p` for the selected axis.
    pub fn input_limit(&self) -> f64 {
        self.input_limits[self.axis - 1]
    }

    /// Half-width of `Y_c = U_p ⊖ U_ref`, the share left for feedback.
    pub fn feedback_limit(&self) -> f64 {
        self.input_limit() - self.reference_limit
    }
}
