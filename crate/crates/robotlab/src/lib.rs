//! Synthetic single-joint robot lab.
//!
//! Each joint of a feedback-linearized arm behaves like a disturbed double
//! integrator behind a short actuator lag; the controller sees it through a
//! quantized encoder, one sample of delay each way and a high-gain velocity
//! observer. [`JointPlantSim`]
//! simulates that loop as ground truth, [`build_candidate`] composes the
//! linear model candidates, and [`design`] sets up the synthesis problems.
//!
//! Suites are recorded in lab coordinates ([`LAB_STATE`]) and projected onto
//! a candidate's state with [`project_suite`].

mod candidates;
mod config;
pub mod design;
mod limits;
mod references;
mod sim;

pub use candidates::{analysis_model, build_candidate, observer_continuous, observer_discrete, CandidateParams, JointModelKind};
pub use config::{ControllerGains, LabConfig, ObserverGains, PlantConfig, ReferenceConfig};
pub use design::{initial_suite, lab_design, observer_a2_problem, validation_suite, LabDesign, SynthMode};
pub use limits::{fit_input_interval, DynamicsSample, DynamicsSampler, SurrogateDynamics};
pub use references::{gen_references, gen_segments, render, Reference, Segment};
pub use sim::{lab_selection, project_suite, runs_to_suite, simulate_suite, JointPlantSim, JointRun, LAB_STATE};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("lab configuration: {0}")]
    Config(String),
    #[error("joint {joint}: torque limit {tau_max} cannot hold any acceleration")]
    InfeasibleTorque { joint: usize, tau_max: f64 },
    #[error(transparent)]
    System(#[from] sysmodel::SysError),
    #[error(transparent)]
    Set(#[from] setlib::SetError),
}
