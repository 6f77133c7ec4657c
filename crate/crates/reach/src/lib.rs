//! Set-based reachability for discrete-time uncertain LTI systems.
//!
//! All operations take discrete systems; noise enters as the combined vector
//! `h = (w, v)` drawn from `W × V` at every step.

mod conformance;
mod deviation;
mod sequence;
mod terminal;

pub use conformance::{check_conformance, ConformanceOptions, ConformanceReport, Violation};
pub use deviation::{deviation_reach, deviation_tube};
pub use sequence::{reach_horizon, reach_step, ReachSequence};
pub use terminal::{terminal_reach, terminal_reach_constrained, ConvergenceTest, TerminalOptions, TerminalSet};

use setlib::SetError;
use sysmodel::SysError;

#[derive(Debug, thiserror::Error)]
pub enum ReachError {
    #[error(transparent)]
    System(#[from] SysError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("{0}")]
    Invalid(String),
    #[error("reachable set did not converge within {k_max} steps (last growth {growth:e})")]
    NotConverged { k_max: usize, growth: f64 },
    #[error("writing reach sequence: {0}")]
    Export(#[from] csv::Error),
}
