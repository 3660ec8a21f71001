use crate::error::LpError;
use crate::program::{LinearProgram, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a variable (structural or row logical) relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// Final basis of a solve, usable as a warm start for a program with the
/// same shape. Statuses are listed for structurals first, then one logical
/// per constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub statuses: Vec<VarStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective including the program's constant offset. NaN unless optimal.
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One multiplier per constraint; `>=` rows nonnegative, `<=` rows
    /// nonpositive, equality rows free (minimization).
    pub duals: Vec<f64>,
    /// Reduced costs of the structural variables.
    pub reduced_costs: Vec<f64>,
    /// Direction of unbounded descent when `status == Unbounded`.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: crate::VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, row: crate::RowId) -> f64 {
        self.duals[row.0]
    }
}

/// Dual objective `sum(dual_i * rhs_i) + sum(d_j * bound_j) + offset`,
/// where each structural's reduced cost is attributed to the bound it
/// rests on.
pub fn dual_objective(program: &LinearProgram, solution: &LpSolution) -> Result<f64, LpError> {
    if solution.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(format!("{:?}", solution.status)));
    }
    let mut total = program.objective_offset();
    for (c, &y) in program.constraints().iter().zip(&solution.duals) {
        total += y * c.rhs;
    }
    for (j, var) in program.variables().iter().enumerate() {
        let d = solution.reduced_costs[j];
        if d == 0.0 {
            continue;
        }
        // Attribute to the active bound; a reduced cost on a variable strictly
        // between bounds is numerical noise and is charged at its value.
        let x = solution.primal[j];
        let bound = if d > 0.0 && var.lower.is_finite() {
            var.lower
        } else if d < 0.0 && var.upper.is_finite() {
            var.upper
        } else {
            x
        };
        total += d * bound;
    }
    Ok(total)
}

/// Checks the sign convention of the duals against the row senses.
pub fn dual_signs_ok(program: &LinearProgram, solution: &LpSolution, tol: f64) -> bool {
    program
        .constraints()
        .iter()
        .zip(&solution.duals)
        .all(|(c, &y)| match c.sense {
            Sense::Ge => y >= -tol,
            Sense::Le => y <= tol,
            Sense::Eq => true,
        })
}
