//! Controller and observer synthesis by minimizing closed-loop terminal sets.
//!
//! A [`ControllerTemplate`] maps a parameter vector to a controller system and
//! a [`Wiring`] that says how it is connected to the plant. Every candidate is
//! scored by the size of the zero-reference terminal set of its tracking
//! channels; constraint channels must stay inside `Y_c` at every step up to
//! convergence. Parameters are searched with the box-constrained simplex
//! search from `optim`.

mod closed_loop;
mod identification;
mod iterative;
mod observer;
mod problem;
mod template;

pub use closed_loop::closed_loop;
pub use identification::{synth_with_identification, IdentSetup};
pub use iterative::{iterative_synthesis, IterationRow, IterationStatus, IterativeOptions, IterativeOutcome, SynthReport};
pub use observer::{observer_transient_synthesis, transient_time, ObserverProblem, ObserverResult, SweepPoint};
pub use problem::{evaluate, synth_controller, verify, Candidate, SynthResult, SynthesisProblem, Verification};
pub use template::{ControllerTemplate, Parameter, Wiring};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    System(#[from] sysmodel::SysError),
    #[error(transparent)]
    Reach(#[from] reach::ReachError),
    #[error(transparent)]
    Set(#[from] setlib::SetError),
    #[error(transparent)]
    Ident(#[from] conform::IdentError),
    #[error("no feasible parameters within {evaluations} evaluations")]
    NoFeasible { evaluations: usize },
    #[error("invalid synthesis problem: {0}")]
    Invalid(String),
}

impl From<optim::DfoError> for SynthError {
    fn from(e: optim::DfoError) -> Self {
        match e {
            optim::DfoError::NoFeasiblePoint { evaluations } => SynthError::NoFeasible { evaluations },
            optim::DfoError::Invalid(m) => SynthError::Invalid(m),
        }
    }
}
