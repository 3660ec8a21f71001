//! Linear program representation: variables with bounds, sparse rows and a
//! minimization objective.

use std::fmt;

use crate::error::LpError;

/// Dense, zero-based index of a variable inside one [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Dense, zero-based index of a constraint inside one [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "="),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

/// Affine expression `constant + sum(coef * var)`.
///
/// Duplicate variables are allowed while building; [`LinExpr::compact`]
/// merges them and drops exact zeros, ordering terms by variable index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        Self {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * scale)).collect(),
            constant: self.constant * scale,
        }
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn compact(mut self) -> LinExpr {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match merged.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr {
            terms: merged,
            constant: self.constant,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

/// Sparse minimization LP.
///
/// The objective is stored densely (one coefficient per variable) plus a
/// constant offset; constraints are sparse rows.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    objective: Vec<f64>,
    objective_offset: f64,
    constraints: Vec<LinearConstraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarId, LpError> {
        let name = name.into();
        if lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(LpError::InvalidBounds { name, lower, upper });
        }
        let index = self.variables.len();
        self.variables.push(Variable {
            index,
            lower,
            upper,
            name,
        });
        self.objective.push(0.0);
        Ok(VarId(index))
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, row: RowId) -> &LinearConstraint {
        &self.constraints[row.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), LpError> {
        self.check_var(var)?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(LpError::InvalidBounds {
                name: self.variables[var.0].name.clone(),
                lower,
                upper,
            });
        }
        self.variables[var.0].lower = lower;
        self.variables[var.0].upper = upper;
        Ok(())
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn set_objective_coefficient(&mut self, var: VarId, coef: f64) -> Result<(), LpError> {
        self.check_var(var)?;
        if !coef.is_finite() {
            return Err(LpError::NonFinite(format!(
                "objective coefficient of {}",
                self.variables[var.0].name
            )));
        }
        self.objective[var.0] = coef;
        Ok(())
    }

    /// Adds `scale * expr` to the objective; the constant lands in the offset.
    pub fn add_objective(&mut self, expr: &LinExpr, scale: f64) -> Result<(), LpError> {
        for &(v, c) in &expr.terms {
            self.check_var(v)?;
            let value = c * scale;
            if !value.is_finite() {
                return Err(LpError::NonFinite(format!(
                    "objective coefficient of {}",
                    self.variables[v.0].name
                )));
            }
            self.objective[v.0] += value;
        }
        self.objective_offset += expr.constant * scale;
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<RowId, LpError> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(LpError::NonFinite(format!("rhs of row {name}")));
        }
        let mut seen: Vec<usize> = Vec::with_capacity(terms.len());
        for &(v, c) in &terms {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!(
                    "coefficient of {} in row {name}",
                    self.variables[v.0].name
                )));
            }
            seen.push(v.0);
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(LpError::DuplicateTerm(name));
        }
        let row = RowId(self.constraints.len());
        self.constraints.push(LinearConstraint {
            terms,
            sense,
            rhs,
            name,
        });
        Ok(row)
    }

    /// Adds `expr (sense) rhs`, moving the expression constant to the right-hand side.
    pub fn add_expr_constraint(
        &mut self,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<RowId, LpError> {
        let expr = expr.compact();
        self.add_constraint(expr.terms, sense, rhs - expr.constant, name)
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) -> Result<(), LpError> {
        if row.0 >= self.constraints.len() {
            return Err(LpError::UnknownRow(row.0));
        }
        if !rhs.is_finite() {
            return Err(LpError::NonFinite(format!(
                "rhs of row {}",
                self.constraints[row.0].name
            )));
        }
        self.constraints[row.0].rhs = rhs;
        Ok(())
    }

    /// Objective value of an arbitrary point, including the constant offset.
    pub fn evaluate_objective(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.constraints[row.0]
            .terms
            .iter()
            .map(|&(v, c)| c * x[v.0])
            .sum()
    }

    /// Largest absolute violation of any bound or row at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &v) in self.variables.iter().zip(x) {
            worst = worst.max(var.lower - v).max(v - var.upper);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let a = self.row_activity(RowId(i), x);
            let viol = match c.sense {
                Sense::Le => a - c.rhs,
                Sense::Ge => c.rhs - a,
                Sense::Eq => (a - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    fn check_var(&self, var: VarId) -> Result<(), LpError> {
        if var.0 >= self.variables.len() {
            Err(LpError::UnknownVariable(var.0))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_variable_gets_index_zero() {
        let mut p = LinearProgram::new();
        let v = p.add_variable(0.0, f64::INFINITY, "Pdam_0").unwrap();
        assert_eq!(v, VarId(0));
        assert_eq!(p.variable(v).name, "Pdam_0");
    }

    #[test]
    fn free_variable_is_accepted() {
        let mut p = LinearProgram::new();
        let v = p
            .add_variable(f64::NEG_INFINITY, f64::INFINITY, "gamma")
            .unwrap();
        assert_eq!(p.variable(v).lower, f64::NEG_INFINITY);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut p = LinearProgram::new();
        assert!(matches!(
            p.add_variable(1.0, 0.0, "bad"),
            Err(LpError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn duplicate_terms_rejected() {
        let mut p = LinearProgram::new();
        let x = p.add_variable(0.0, 1.0, "x").unwrap();
        let err = p
            .add_constraint(vec![(x, 1.0), (x, 2.0)], Sense::Le, 1.0, "dup")
            .unwrap_err();
        assert!(matches!(err, LpError::DuplicateTerm(_)));
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut p = LinearProgram::new();
        let err = p
            .add_constraint(vec![(VarId(3), 1.0)], Sense::Le, 1.0, "r")
            .unwrap_err();
        assert!(matches!(err, LpError::UnknownVariable(3)));
    }

    #[test]
    fn compact_merges_and_moves_constant() {
        let mut p = LinearProgram::new();
        let x = p.add_variable(0.0, 10.0, "x").unwrap();
        let y = p.add_variable(0.0, 10.0, "y").unwrap();
        let mut e = LinExpr::new();
        e.add_term(y, 1.0)
            .add_term(x, 2.0)
            .add_term(y, -1.0)
            .add_constant(3.0);
        let r = p.add_expr_constraint(e, Sense::Ge, 5.0, "r").unwrap();
        let c = p.constraint(r);
        assert_eq!(c.terms, vec![(x, 2.0)]);
        assert_eq!(c.rhs, 2.0);
    }
}
