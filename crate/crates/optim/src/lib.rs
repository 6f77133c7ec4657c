//! Solvers shared by identification and synthesis.
//!
//! [`lp`] solves dense linear programs `min c·x, A x ≤ b, l ≤ x ≤ u` exactly
//! (vertex solutions, deterministic). [`dfo`] minimizes a black-box objective
//! over a box with a seeded multistart simplex search.

pub mod dfo;
pub mod lp;

pub use dfo::{minimize_dfo, DfoError, DfoProblem, DfoResult, Evaluation, PENALTY_WEIGHT};
pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpError, LpOptions, LpSolution};
