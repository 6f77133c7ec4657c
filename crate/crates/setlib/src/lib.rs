//! Zonotopes, intervals and halfspace polytopes.
//!
//! A [`Zonotope`] stores a center, a template generator matrix and one
//! non-negative scale per template column; its effective generators are the
//! template columns multiplied by their scales. Sums, linear maps, interval
//! hulls and support values are closed form. Halfspace conversion enumerates
//! facets from generator subsets and is limited to dimension 4.

mod facets;
mod hull;
mod interval;
pub mod matrix_io;
mod polytope;
mod zonotope;

pub use facets::{constraint_normals, containment_margin, cross_nx, halfspace_rep, zonotope_in_polytope, MAX_FACET_DIM};
pub use hull::PlanarHull;
pub use interval::Interval;
pub use polytope::Polytope;
pub use zonotope::Zonotope;

use thiserror::Error;

/// Containment tolerance used when callers do not pass their own.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: &'static str, expected: usize, found: usize },
    #[error("invalid set: {0}")]
    Invalid(String),
    #[error("zonotope in {dim} dimensions has only {generators} non-zero generators; facets need at least {}", dim - 1)]
    Degenerate { dim: usize, generators: usize },
    #[error("halfspace conversion supports at most {MAX_FACET_DIM} dimensions, got {0}")]
    TooManyDimensions(usize),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<(), SetError> {
    if expected == found {
        Ok(())
    } else {
        Err(SetError::Dimension { context, expected, found })
    }
}
