//! Multi-cut Benders decomposition.
//!
//! The master holds the bids, one recourse estimate `theta_s` per scenario
//! (plus the CVaR threshold and tail excesses when risk-averse) and the
//! accumulated optimality cuts. Each subproblem pins a free copy of the bids
//! with equality rows; the duals of those rows are the cut gradient.
//! Every choice of bids is feasible in every scenario because imbalance
//! volumes are unbounded, so no feasibility cuts are needed.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vpp_lp::{
    dual_signs_ok, Basis, LinearProgram, LpStatus, RowId, Sense, SolverOptions, VarId, VarStatus,
};

use crate::error::{Result, VppError};
use crate::market::{FirstStageDecision, FirstStageVars};
use crate::model::{ScenarioBlock, ScenarioOutcome, VppModel};
use crate::scenario::{Scenario, ScenarioSet};
use crate::stochastic::{CvarVars, RiskMeasure, StochasticSolution};

/// Lower bound on every recourse estimate before cuts exist, currency units.
pub const THETA_FLOOR: f64 = -1e7;
const CUT_DEDUP_TOL: f64 = 1e-12;
const CUT_AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BendersOptions {
    /// Relative gap `(UB - LB) / max(1, |UB|)` at which to stop.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Width of the subproblem worker pool; never changes results.
    pub workers: usize,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions {
            tolerance: 1e-6,
            max_iterations: 200,
            workers: 1,
        }
    }
}

/// `theta_s >= intercept + gradient · x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityCut {
    pub scenario: usize,
    pub intercept: f64,
    pub gradient: Vec<f64>,
}

impl OptimalityCut {
    pub fn from_point(scenario: usize, x_hat: &[f64], value: f64, gradient: Vec<f64>) -> Self {
        let intercept = value - dot(&gradient, x_hat);
        OptimalityCut {
            scenario,
            intercept,
            gradient,
        }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.gradient, x)
    }

    fn duplicates(&self, other: &OptimalityCut) -> bool {
        self.scenario == other.scenario
            && (self.intercept - other.intercept).abs()
                <= CUT_DEDUP_TOL * (1.0 + self.intercept.abs())
            && self
                .gradient
                .iter()
                .zip(&other.gradient)
                .all(|(a, b)| (a - b).abs() <= CUT_DEDUP_TOL * (1.0 + a.abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub outcome: ScenarioOutcome,
}

/// Second-stage LP of one scenario with the bids pinned by equality rows.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub index: usize,
    program: LinearProgram,
    copy: FirstStageVars,
    pins: Vec<RowId>,
    block: ScenarioBlock,
    basis: Option<Basis>,
}

impl Subproblem {
    pub fn build(model: &VppModel, scenario: &Scenario, index: usize) -> Result<Self> {
        let mut program = LinearProgram::new();
        let copy = FirstStageVars::declare_free(&mut program, &model.horizon)?;
        let pins = copy
            .all()
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                program.add_constraint(vec![(v, 1.0)], Sense::Eq, 0.0, format!("pin_{j}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let block = model.emit_scenario(&mut program, scenario, &copy, "")?;
        program.add_objective(&block.costs.total(), 1.0)?;
        Ok(Subproblem {
            index,
            program,
            copy,
            pins,
            block,
            basis: None,
        })
    }

    pub fn program(&self) -> &LinearProgram {
        &self.program
    }

    /// Solves at `x_hat`, warm-starting from this scenario's previous basis.
    pub fn solve_at(
        &mut self,
        model: &VppModel,
        scenario: &Scenario,
        x_hat: &[f64],
    ) -> Result<SubproblemResult> {
        for (&row, &v) in self.pins.iter().zip(x_hat) {
            self.program.set_rhs(row, v)?;
        }
        let sol = self
            .program
            .solve_with(&SolverOptions::default(), self.basis.as_ref())?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                let detail = model
                    .diagnose_devices(scenario)
                    .unwrap_or_else(|| "network or market coupling".into());
                return Err(VppError::Infeasible(format!(
                    "subproblem {} has no feasible recourse ({detail}); complete recourse is violated",
                    self.index
                )));
            }
            LpStatus::Unbounded => {
                return Err(VppError::Unbounded(format!("subproblem {}", self.index)))
            }
        }
        let gradient: Vec<f64> = self.pins.iter().map(|&r| sol.dual(r)).collect();
        // A cut is only valid if the multipliers are dual feasible; strong
        // duality plus sign checks certify that.
        let dual = self.program.dual_objective(&sol)?;
        if (dual - sol.objective).abs() > CUT_AUDIT_TOL * (1.0 + sol.objective.abs())
            || !dual_signs_ok(&self.program, &sol, 1e-7)
        {
            return Err(VppError::Lp(vpp_lp::LpError::Numerical(format!(
                "cut audit failed for scenario {}: primal {} vs dual {}",
                self.index, sol.objective, dual
            ))));
        }
        let outcome = ScenarioOutcome {
            breakdown: self.block.costs.evaluate(&sol.primal),
            dispatch: self.block.dispatch(model, &sol.primal),
        };
        debug_assert_eq!(self.copy.all().len(), x_hat.len());
        self.basis = sol.basis.clone();
        Ok(SubproblemResult {
            cost: sol.objective,
            gradient,
            outcome,
        })
    }
}

/// One-off subproblem solve without warm start.
pub fn solve_subproblem(
    model: &VppModel,
    scenario: &Scenario,
    x_hat: &FirstStageDecision,
) -> Result<SubproblemResult> {
    Subproblem::build(model, scenario, 0)?.solve_at(model, scenario, &x_hat.to_vec())
}

#[derive(Debug, Clone)]
pub struct MasterProblem {
    program: LinearProgram,
    x: FirstStageVars,
    theta: Vec<VarId>,
    cvar: Option<CvarVars>,
    cuts: Vec<Vec<OptimalityCut>>,
    basis: Option<Basis>,
}

impl MasterProblem {
    pub fn new(model: &VppModel, probabilities: &[f64], risk: RiskMeasure) -> Result<Self> {
        risk.validate()?;
        let mut program = LinearProgram::new();
        let x = FirstStageVars::declare(&mut program, &model.horizon, model.bid_caps())?;
        let mut theta = Vec::with_capacity(probabilities.len());
        for s in 0..probabilities.len() {
            theta.push(program.add_variable(THETA_FLOOR, f64::INFINITY, format!("theta_{s}"))?);
        }
        let cvar = match risk {
            RiskMeasure::Expectation => {
                for (&th, &p) in theta.iter().zip(probabilities) {
                    program.set_objective_coefficient(th, p)?;
                }
                None
            }
            RiskMeasure::Cvar { alpha } => {
                let gamma = program.add_variable(f64::NEG_INFINITY, f64::INFINITY, "cvar_gamma")?;
                program.set_objective_coefficient(gamma, 1.0)?;
                let mut excess = Vec::with_capacity(theta.len());
                for (s, (&th, &p)) in theta.iter().zip(probabilities).enumerate() {
                    let y = program.add_variable(0.0, f64::INFINITY, format!("cvar_excess_{s}"))?;
                    program.set_objective_coefficient(y, p / (1.0 - alpha))?;
                    program.add_constraint(
                        vec![(y, 1.0), (th, -1.0), (gamma, 1.0)],
                        Sense::Ge,
                        0.0,
                        format!("cvar_tail_{s}"),
                    )?;
                    excess.push(y);
                }
                Some(CvarVars { gamma, excess })
            }
        };
        let cuts = vec![Vec::new(); probabilities.len()];
        Ok(MasterProblem {
            program,
            x,
            theta,
            cvar,
            cuts,
            basis: None,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.program.num_constraints()
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts.iter().map(Vec::len).sum()
    }

    pub fn cuts(&self, scenario: usize) -> &[OptimalityCut] {
        &self.cuts[scenario]
    }

    pub fn has_cvar(&self) -> bool {
        self.cvar.is_some()
    }

    /// Appends cuts, skipping any that duplicate an existing one. Returns
    /// the number of rows added.
    pub fn add_cuts(&mut self, cuts: impl IntoIterator<Item = OptimalityCut>) -> Result<usize> {
        let xs = self.x.all();
        let mut added = 0;
        for cut in cuts {
            let s = cut.scenario;
            if s >= self.theta.len() || cut.gradient.len() != xs.len() {
                return Err(VppError::Length {
                    what: "cut gradient",
                    expected: xs.len(),
                    got: cut.gradient.len(),
                });
            }
            if self.cuts[s].iter().any(|c| c.duplicates(&cut)) {
                continue;
            }
            let mut terms = vec![(self.theta[s], 1.0)];
            terms.extend(
                xs.iter()
                    .zip(&cut.gradient)
                    .filter(|(_, &g)| g != 0.0)
                    .map(|(&v, &g)| (v, -g)),
            );
            let k = self.cuts[s].len();
            self.program
                .add_constraint(terms, Sense::Ge, cut.intercept, format!("cut_{s}_{k}"))?;
            self.cuts[s].push(cut);
            added += 1;
        }
        Ok(added)
    }

    /// Solves the master; returns the bid vector and the lower bound.
    pub fn solve(&mut self) -> Result<(Vec<f64>, f64)> {
        let warm = self.basis.as_ref().map(|b| {
            let mut statuses = b.statuses.clone();
            statuses.resize(
                self.program.num_variables() + self.program.num_constraints(),
                VarStatus::Basic,
            );
            Basis { statuses }
        });
        let sol = self
            .program
            .solve_with(&SolverOptions::default(), warm.as_ref())?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(VppError::Infeasible("master problem".into())),
            LpStatus::Unbounded => return Err(VppError::Unbounded("master problem".into())),
        }
        self.basis = sol.basis.clone();
        let x = self.x.all().iter().map(|v| sol.value(*v)).collect();
        Ok((x, sol.objective))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub lower_bounds: Vec<f64>,
    /// Risk functional of realized subproblem costs at each iterate.
    pub upper_bounds: Vec<f64>,
    pub best_upper_bounds: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Elapsed seconds at the end of each iteration.
    pub wall_seconds: Vec<f64>,
    pub subproblems_solved: Vec<usize>,
    pub cuts_added: Vec<usize>,
    pub converged: bool,
    pub final_gap: f64,
}

#[derive(Debug, Clone)]
pub struct BendersResult {
    pub solution: StochasticSolution,
    pub report: ConvergenceReport,
}

pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    (upper - lower) / upper.abs().max(1.0)
}

/// Runs the decomposition to the gap tolerance. When the iteration limit
/// is hit the best iterate is returned with `report.converged == false`.
pub fn solve_benders(
    model: &VppModel,
    scenarios: &ScenarioSet,
    risk: RiskMeasure,
    options: &BendersOptions,
) -> Result<BendersResult> {
    if scenarios.is_empty() {
        return Err(VppError::Scenario("scenario set is empty".into()));
    }
    if !(options.tolerance > 0.0) {
        return Err(VppError::Config(
            "Benders tolerance must be positive".into(),
        ));
    }
    let probabilities = scenarios.probabilities();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| VppError::Config(format!("worker pool: {e}")))?;

    let mut subproblems = pool.install(|| {
        scenarios
            .scenarios
            .par_iter()
            .enumerate()
            .map(|(s, sc)| Subproblem::build(model, sc, s))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut master = MasterProblem::new(model, &probabilities, risk)?;

    let start = Instant::now();
    let mut report = ConvergenceReport::default();
    let mut best: Option<(f64, Vec<f64>, Vec<ScenarioOutcome>)> = None;
    let mut lower = f64::NEG_INFINITY;

    for _ in 0..options.max_iterations {
        let (x_hat, lb) = master.solve()?;
        lower = lower.max(lb);

        let results = pool.install(|| {
            subproblems
                .par_iter_mut()
                .zip(&scenarios.scenarios)
                .map(|(sp, sc)| sp.solve_at(model, sc, &x_hat))
                .collect::<Result<Vec<_>>>()
        })?;

        let costs: Vec<f64> = results.iter().map(|r| r.cost).collect();
        let upper = risk.evaluate(&costs, &probabilities)?;
        if best.as_ref().is_none_or(|(b, _, _)| upper < *b) {
            best = Some((
                upper,
                x_hat.clone(),
                results.iter().map(|r| r.outcome.clone()).collect(),
            ));
        }
        let best_upper = best.as_ref().unwrap().0;
        let gap = relative_gap(lower, best_upper);

        let cuts = results
            .into_iter()
            .enumerate()
            .map(|(s, r)| OptimalityCut::from_point(s, &x_hat, r.cost, r.gradient));
        let added = if gap <= options.tolerance {
            0
        } else {
            master.add_cuts(cuts)?
        };

        report.iterations += 1;
        report.lower_bounds.push(lower);
        report.upper_bounds.push(upper);
        report.best_upper_bounds.push(best_upper);
        report.gaps.push(gap);
        report.wall_seconds.push(start.elapsed().as_secs_f64());
        report.subproblems_solved.push(scenarios.len());
        report.cuts_added.push(added);
        report.final_gap = gap;

        if gap <= options.tolerance {
            report.converged = true;
            break;
        }
        if added == 0 {
            // Every cut already present: the master cannot move any more.
            break;
        }
    }

    let (objective, x, outcomes) = best.expect("at least one iteration ran");
    let solution = StochasticSolution {
        first_stage: FirstStageDecision::from_vec(&model.horizon, &x)?,
        outcomes,
        objective,
        risk,
        probabilities,
    };
    Ok(BendersResult { solution, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_from_point_is_tight_there() {
        let c = OptimalityCut::from_point(0, &[1.0, 2.0], 5.0, vec![0.5, -1.0]);
        assert!((c.value_at(&[1.0, 2.0]) - 5.0).abs() < 1e-15);
        assert!((c.value_at(&[0.0, 0.0]) - 6.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_detection() {
        let a = OptimalityCut {
            scenario: 0,
            intercept: 1.0,
            gradient: vec![1.0, 2.0],
        };
        let mut b = a.clone();
        assert!(a.duplicates(&b));
        b.gradient[1] += 1e-9;
        assert!(!a.duplicates(&b));
        b = a.clone();
        b.scenario = 1;
        assert!(!a.duplicates(&b));
    }

    #[test]
    fn gap_uses_unit_floor() {
        assert_eq!(relative_gap(-0.5, 0.5), 1.0);
        assert_eq!(relative_gap(90.0, 100.0), 0.1);
    }
}
