//! Identification of disturbance and measurement-error sets such that every
//! recorded output lies in the model's reachable set.
//!
//! Deviations `y − y*` are reduced per step to their extreme points, the
//! containment conditions become linear rows in the noise centers and scales,
//! and the summed tube size is minimized by one linear program. An outer
//! derivative-free search handles free system-matrix entries.

mod coverage;
mod data;
mod full;
mod identify;
mod program;

pub use coverage::{coverage_check, CoverageFlag, CoverageReport, CoverageStep};
pub use data::{DataOptions, DeviationData, WindowId};
pub use full::{identify_full, FreeEntry, FullOptions, FullResult};
pub use identify::{identify_from_data, identify_uncertainty, IdentOptions, IdentResult, LpStats, NoiseParam};
pub use program::{build_ident_lp, IdentLp, LpBuildOptions, VariableLayout, ZeroRowCheck};

#[derive(Debug, thiserror::Error)]
pub enum IdentError {
    #[error(transparent)]
    System(#[from] sysmodel::SysError),
    #[error(transparent)]
    Reach(#[from] reach::ReachError),
    #[error(transparent)]
    Set(#[from] setlib::SetError),
    #[error("identification LP: {0}")]
    Lp(#[from] optim::LpError),
    #[error("outer search: {0}")]
    Search(#[from] optim::DfoError),
    #[error("deviation at step {step} (case {case}, start {start}) lies outside every direction the noise can reach, by {excess:e}; run the coverage check")]
    Coverage { step: usize, case: usize, start: usize, excess: f64 },
    #[error("identified model fails conformance on its own data: {violations} violations, worst margin {max_margin:e}")]
    SelfCheck { violations: usize, max_margin: f64 },
    #[error("{0}")]
    Invalid(String),
}
