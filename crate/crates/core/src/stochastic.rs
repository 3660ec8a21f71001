//! Risk measures and the extensive-form (deterministic equivalent) LP.

use std::fmt;

use serde::{Deserialize, Serialize};
use vpp_lp::{Basis, LinExpr, LinearProgram, LpStatus, Sense, SolverOptions, VarId};

use crate::error::{Result, VppError};
use crate::market::{FirstStageDecision, FirstStageVars};
use crate::model::{ScenarioBlock, ScenarioOutcome, VppModel};
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum RiskMeasure {
    Expectation,
    /// Mean cost of the worst `1 - alpha` probability tail.
    Cvar {
        alpha: f64,
    },
}

impl RiskMeasure {
    pub fn cvar(alpha: f64) -> Result<Self> {
        let r = RiskMeasure::Cvar { alpha };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if let RiskMeasure::Cvar { alpha } = *self {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(VppError::Config(format!(
                    "CVaR level {alpha} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Applies the risk functional to a discrete cost distribution.
    pub fn evaluate(&self, costs: &[f64], probs: &[f64]) -> Result<f64> {
        match *self {
            RiskMeasure::Expectation => expectation(costs, probs),
            RiskMeasure::Cvar { alpha } => cvar_of_samples(costs, probs, alpha),
        }
    }
}

impl fmt::Display for RiskMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskMeasure::Expectation => write!(f, "expectation"),
            RiskMeasure::Cvar { alpha } => write!(f, "cvar({alpha})"),
        }
    }
}

fn check_distribution(costs: &[f64], probs: &[f64]) -> Result<()> {
    if costs.is_empty() {
        return Err(VppError::Scenario("empty cost distribution".into()));
    }
    if costs.len() != probs.len() {
        return Err(VppError::Length {
            what: "probabilities",
            expected: costs.len(),
            got: probs.len(),
        });
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(VppError::Scenario(format!(
            "probabilities must be nonnegative and sum to 1, got {total}"
        )));
    }
    Ok(())
}

pub fn expectation(costs: &[f64], probs: &[f64]) -> Result<f64> {
    check_distribution(costs, probs)?;
    Ok(costs.iter().zip(probs).map(|(c, p)| c * p).sum())
}

/// Empirical CVaR of a discrete cost distribution at level `alpha`.
///
/// Sorts costs in decreasing order and averages the top `1 - alpha` of
/// probability mass, taking a fraction of the atom that straddles the
/// quantile.
pub fn cvar_of_samples(costs: &[f64], probs: &[f64], alpha: f64) -> Result<f64> {
    check_distribution(costs, probs)?;
    RiskMeasure::Cvar { alpha }.validate()?;
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]));
    let tail = 1.0 - alpha;
    let mut remaining = tail;
    let mut acc = 0.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let take = probs[i].min(remaining);
        acc += take * costs[i];
        remaining -= take;
    }
    if remaining > 0.0 {
        // Probabilities summed slightly below one; the last atom absorbs it.
        acc += remaining * costs[*order.last().unwrap()];
    }
    Ok(acc / tail)
}

#[derive(Debug, Clone)]
pub struct CvarVars {
    pub gamma: VarId,
    /// Cost excess over `gamma`, one per scenario.
    pub excess: Vec<VarId>,
}

/// Extensive form: shared first-stage bids followed by one block per scenario.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub program: LinearProgram,
    pub first: FirstStageVars,
    pub blocks: Vec<ScenarioBlock>,
    pub cvar: Option<CvarVars>,
    pub risk: RiskMeasure,
    pub probabilities: Vec<f64>,
}

/// Solution of the stochastic program by either method.
#[derive(Debug, Clone)]
pub struct StochasticSolution {
    pub first_stage: FirstStageDecision,
    pub outcomes: Vec<ScenarioOutcome>,
    /// Risk functional of the scenario costs at the returned bids.
    pub objective: f64,
    pub risk: RiskMeasure,
    pub probabilities: Vec<f64>,
}

impl StochasticSolution {
    pub fn costs(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.breakdown.total).collect()
    }

    pub fn expected_cost(&self) -> f64 {
        self.costs()
            .iter()
            .zip(&self.probabilities)
            .map(|(c, p)| c * p)
            .sum()
    }

    pub fn cost_cvar(&self, alpha: f64) -> Result<f64> {
        cvar_of_samples(&self.costs(), &self.probabilities, alpha)
    }
}

/// Rows of one scenario block, used to guard the extensive-form size.
pub fn rows_per_scenario(model: &VppModel, scenarios: &ScenarioSet) -> Result<usize> {
    let first_scenario = scenarios
        .scenarios
        .first()
        .ok_or_else(|| VppError::Scenario("scenario set is empty".into()))?;
    let mut scratch = LinearProgram::new();
    let first = FirstStageVars::declare(&mut scratch, &model.horizon, model.bid_caps())?;
    model.emit_scenario(&mut scratch, first_scenario, &first, "")?;
    Ok(scratch.num_constraints() + 1)
}

pub fn build_extensive(
    model: &VppModel,
    scenarios: &ScenarioSet,
    risk: RiskMeasure,
) -> Result<ExtensiveForm> {
    if scenarios.is_empty() {
        return Err(VppError::Scenario("scenario set is empty".into()));
    }
    risk.validate()?;
    let probabilities = scenarios.probabilities();
    let mut program = LinearProgram::new();
    let first = FirstStageVars::declare(&mut program, &model.horizon, model.bid_caps())?;
    let cvar = match risk {
        RiskMeasure::Expectation => None,
        RiskMeasure::Cvar { alpha } => {
            let gamma = program.add_variable(f64::NEG_INFINITY, f64::INFINITY, "cvar_gamma")?;
            program.set_objective_coefficient(gamma, 1.0)?;
            let mut excess = Vec::with_capacity(scenarios.len());
            for (s, &p) in probabilities.iter().enumerate() {
                let y = program.add_variable(0.0, f64::INFINITY, format!("cvar_excess_{s}"))?;
                program.set_objective_coefficient(y, p / (1.0 - alpha))?;
                excess.push(y);
            }
            Some(CvarVars { gamma, excess })
        }
    };
    let mut blocks = Vec::with_capacity(scenarios.len());
    for (s, sc) in scenarios.scenarios.iter().enumerate() {
        let block = model.emit_scenario(&mut program, sc, &first, &format!("s{s}_"))?;
        let cost = block.costs.total();
        match &cvar {
            None => program.add_objective(&cost, probabilities[s])?,
            Some(c) => {
                // excess_s >= cost_s - gamma
                let mut e = LinExpr::new();
                e.add_term(c.excess[s], 1.0)
                    .add_term(c.gamma, 1.0)
                    .add_expr(&cost, -1.0);
                program.add_expr_constraint(e, Sense::Ge, 0.0, format!("s{s}_cvar_tail"))?;
            }
        }
        blocks.push(block);
    }
    Ok(ExtensiveForm {
        program,
        first,
        blocks,
        cvar,
        risk,
        probabilities,
    })
}

impl ExtensiveForm {
    pub fn solve(&self, model: &VppModel, scenarios: &ScenarioSet) -> Result<StochasticSolution> {
        Ok(self.solve_from(model, scenarios, None)?.0)
    }

    /// Solves from an optional starting basis and returns the final basis
    /// alongside the solution.
    pub fn solve_from(
        &self,
        model: &VppModel,
        scenarios: &ScenarioSet,
        warm: Option<&Basis>,
    ) -> Result<(StochasticSolution, Option<Basis>)> {
        let sol = self.program.solve_with(&SolverOptions::default(), warm)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                let culprit = scenarios.scenarios.iter().enumerate().find_map(|(s, sc)| {
                    model
                        .diagnose_devices(sc)
                        .map(|d| format!("scenario {s}: {d}"))
                });
                return Err(VppError::Infeasible(culprit.unwrap_or_else(|| {
                    "extensive form (network or market coupling)".into()
                })));
            }
            LpStatus::Unbounded => return Err(VppError::Unbounded("extensive form".into())),
        }
        let first_stage = self.first.values(&sol.primal);
        let outcomes = self
            .blocks
            .iter()
            .zip(&scenarios.scenarios)
            .map(|(b, sc)| {
                // Recomputed rather than read off the LP: under CVaR, scenarios
                // outside the tail carry no weight and may leave the withdrawal
                // epigraph slack.
                let dispatch = b.dispatch(model, &sol.primal);
                ScenarioOutcome {
                    breakdown: model.recompute_breakdown(sc, &first_stage, &dispatch),
                    dispatch,
                }
            })
            .collect();
        let solution = StochasticSolution {
            first_stage,
            outcomes,
            objective: sol.objective,
            risk: self.risk,
            probabilities: self.probabilities.clone(),
        };
        Ok((solution, sol.basis))
    }
}

/// Builds and solves the extensive form, refusing instances above `max_rows`.
pub fn solve_extensive(
    model: &VppModel,
    scenarios: &ScenarioSet,
    risk: RiskMeasure,
    max_rows: Option<usize>,
) -> Result<StochasticSolution> {
    if let Some(limit) = max_rows {
        let rows = rows_per_scenario(model, scenarios)? * scenarios.len();
        if rows > limit {
            return Err(VppError::SizeGuard { rows, limit });
        }
    }
    build_extensive(model, scenarios, risk)?.solve(model, scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvar_constant_costs() {
        for alpha in [0.1, 0.5, 0.9, 0.99] {
            assert!((cvar_of_samples(&[4.0; 5], &[0.2; 5], alpha).unwrap() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cvar_two_point() {
        assert_eq!(
            cvar_of_samples(&[0.0, 10.0], &[0.5, 0.5], 0.5).unwrap(),
            10.0
        );
    }

    #[test]
    fn cvar_top_decile() {
        let costs: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let v = cvar_of_samples(&costs, &[0.1; 10], 0.9).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cvar_splits_atom() {
        // tail 0.25 = 0.2 of the top atom + 0.05 of the next
        let v = cvar_of_samples(&[1.0, 2.0, 3.0], &[0.3, 0.5, 0.2], 0.75).unwrap();
        assert!((v - (0.2 * 3.0 + 0.05 * 2.0) / 0.25).abs() < 1e-12);
    }

    #[test]
    fn cvar_rejects_bad_input() {
        assert!(cvar_of_samples(&[], &[], 0.5).is_err());
        assert!(cvar_of_samples(&[1.0], &[1.0], 1.0).is_err());
        assert!(cvar_of_samples(&[1.0, 2.0], &[0.5, 0.4], 0.5).is_err());
    }

    #[test]
    fn risk_measure_json_shape() {
        let r: RiskMeasure = serde_json::from_str(r#"{"measure":"cvar","alpha":0.9}"#).unwrap();
        assert_eq!(r, RiskMeasure::Cvar { alpha: 0.9 });
        let r: RiskMeasure = serde_json::from_str(r#"{"measure":"expectation"}"#).unwrap();
        assert_eq!(r, RiskMeasure::Expectation);
    }
}
