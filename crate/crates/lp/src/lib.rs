//! Sparse linear programming with a bounded revised simplex method.
//!
//! Solutions carry dual multipliers for every row, which is what cut-based
//! decomposition schemes need.

// Index loops over parallel time series read better than zipped iterators,
// and `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod export;
mod lu;
mod program;
mod simplex;
mod solution;

pub use error::LpError;
pub use export::write_lp_format;
pub use program::{LinExpr, LinearConstraint, LinearProgram, RowId, Sense, VarId, Variable};
pub use simplex::{SolverOptions, FEAS_TOL, OPT_TOL};
pub use solution::{dual_objective, dual_signs_ok, Basis, LpSolution, LpStatus, VarStatus};

impl LinearProgram {
    /// Solves with default options from the all-logical starting basis.
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        simplex::solve(self, &SolverOptions::default(), None)
    }

    /// Solves with explicit options, optionally warm-started from a basis
    /// returned by an earlier solve of a program with the same shape.
    pub fn solve_with(
        &self,
        options: &SolverOptions,
        warm_start: Option<&Basis>,
    ) -> Result<LpSolution, LpError> {
        simplex::solve(self, options, warm_start)
    }

    pub fn dual_objective(&self, solution: &LpSolution) -> Result<f64, LpError> {
        dual_objective(self, solution)
    }
}
