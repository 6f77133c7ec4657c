//! Uncertain linear time-invariant systems.
//!
//! [`LtiSystem`] holds the plant matrices together with zonotopic process
//! disturbance `W` and measurement error `V`. Continuous systems become
//! discrete through exact zero-order hold ([`discretize`]) or the bilinear
//! transform ([`discretize_bilinear`]). [`series`] and [`feedback`] build
//! interconnections; states are ordered upstream first. Test data lives in
//! [`TestSuite`]s of input/output traces with known initial states.

mod compose;
mod discretize;
pub mod io;
mod simulate;
mod suite;
mod system;

pub use compose::{feedback, feedback_full, series};
pub use discretize::{discretize, discretize_bilinear};
pub use simulate::{disturbance_maps, nominal_output, simulate, DisturbanceMaps};
pub use suite::{CaseView, TestCase, TestSuite};
pub use system::{LtiSystem, MatrixId, Timing};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SysError {
    #[error("matrix {name} must be {expected:?}, found {found:?}")]
    Shape { name: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("{0}")]
    Invalid(String),
    #[error("operation needs a discrete-time system")]
    NotDiscrete,
    #[error("system is already discrete")]
    AlreadyDiscrete,
    #[error("subsystems have different timing")]
    TimingMismatch,
    #[error("algebraic loop: I − D1·D2 is singular")]
    AlgebraicLoop,
    #[error(transparent)]
    Set(#[from] setlib::SetError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}
