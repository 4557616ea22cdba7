//! Small dense LP/MILP engine.
//!
//! [`solve_lp`] is a bounded-variable primal simplex, [`solve_milp`] a
//! best-first branch-and-bound over binary columns, and
//! [`brute_force_milp`] an enumeration oracle for tests.

mod bnb;
mod brute;
mod duality;
mod lp_format;
mod problem;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with, BnbStats, MilpOptions, INTEGRALITY_TOL};
pub use brute::{brute_force_milp, BRUTE_FORCE_MAX_BINARIES};
pub use duality::dual_objective;
pub use lp_format::write_lp_format;
pub use problem::{Constraint, LinearProgram, MixedIntegerProgram, Relation, Solution, Status};
pub use simplex::{solve_lp, solve_lp_with, LpOptions, PivotRule};

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("simplex did not terminate within {cap} pivots")]
    Numerical { cap: usize },
    #[error("brute force handles at most {max} binaries, problem has {got}")]
    Capacity { max: usize, got: usize },
}
