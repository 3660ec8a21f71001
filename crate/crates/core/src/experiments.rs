//! Post-solve reporting and the distribution-tariff sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vpp_lp::Basis;

use crate::benders::{solve_benders, BendersOptions, ConvergenceReport};
use crate::error::{Result, VppError};
use crate::market::CostBreakdown;
use crate::market::FirstStageDecision;
use crate::model::{DispatchSeries, ScenarioOutcome, VppModel};
use crate::scenario::ScenarioSet;
use crate::stochastic::{
    build_extensive, cvar_of_samples, rows_per_scenario, solve_extensive, RiskMeasure,
    StochasticSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolveMethod {
    Extensive {
        /// Refuse instances whose extensive form exceeds this many rows.
        max_rows: Option<usize>,
    },
    Benders(BendersOptions),
}

impl Default for SolveMethod {
    fn default() -> Self {
        SolveMethod::Extensive { max_rows: None }
    }
}

/// Solves with either method. The report is present for Benders only.
pub fn solve(
    model: &VppModel,
    scenarios: &ScenarioSet,
    risk: RiskMeasure,
    method: &SolveMethod,
) -> Result<(StochasticSolution, Option<ConvergenceReport>)> {
    for sc in &scenarios.scenarios {
        model.check_scenario(sc)?;
    }
    match method {
        SolveMethod::Extensive { max_rows } => {
            Ok((solve_extensive(model, scenarios, risk, *max_rows)?, None))
        }
        SolveMethod::Benders(opts) => {
            let r = solve_benders(model, scenarios, risk, opts)?;
            Ok((r.solution, Some(r.report)))
        }
    }
}

/// Energy moved by each device class, expected over scenarios, kWh.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceThroughput {
    pub pv_kwh: f64,
    pub heat_pump_kwh: f64,
    pub ev_charge_kwh: f64,
    pub ev_discharge_kwh: f64,
    pub bess_charge_kwh: f64,
    pub bess_discharge_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitReport {
    pub expected_profit: f64,
    pub profit_std: f64,
    pub cvar_alpha: f64,
    /// CVaR of cost (the negated profit) at `cvar_alpha`.
    pub cost_cvar: f64,
    /// Per-stream expectations.
    pub expected: CostBreakdown,
    /// Day-ahead scheduled energy, export positive, kWh.
    pub scheduled_energy_kwh: f64,
    /// Expected net import at the PCC, kWh.
    pub expected_pcc_import_kwh: f64,
    /// Expected tariffed withdrawal summed over buses, kWh.
    pub expected_withdrawal_kwh: f64,
    pub throughput: DeviceThroughput,
    pub histogram: Vec<HistogramBin>,
}

fn sum_energy(series: &[Vec<f64>], dt: f64) -> f64 {
    series.iter().flatten().sum::<f64>() * dt
}

/// Profit histogram with `bins` equal-width bins over the observed range.
pub fn profit_histogram(profits: &[f64], probs: &[f64], bins: usize) -> Vec<HistogramBin> {
    if profits.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = profits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lower: lo + k as f64 * width,
            upper: lo + (k + 1) as f64 * width,
            probability: 0.0,
        })
        .collect();
    for (&p, &w) in profits.iter().zip(probs) {
        let k = (((p - lo) / width) as usize).min(bins - 1);
        out[k].probability += w;
    }
    out
}

/// Withdrawal per bus and step recomputed from a dispatch, kW.
pub fn bus_withdrawals(
    model: &VppModel,
    scenarios: &ScenarioSet,
    s: usize,
    d: &DispatchSeries,
) -> Vec<Vec<f64>> {
    model
        .injections(&scenarios.scenarios[s].series, d)
        .into_iter()
        .map(|bus| bus.into_iter().map(|v| (-v).max(0.0)).collect())
        .collect()
}

pub fn profit_report(
    model: &VppModel,
    scenarios: &ScenarioSet,
    solution: &StochasticSolution,
    alpha: f64,
    bins: usize,
) -> Result<ProfitReport> {
    if solution.outcomes.len() != scenarios.len() {
        return Err(VppError::Length {
            what: "scenario outcomes",
            expected: scenarios.len(),
            got: solution.outcomes.len(),
        });
    }
    let probs = &solution.probabilities;
    let dt = model.horizon.step_hours;
    let profits: Vec<f64> = solution
        .outcomes
        .iter()
        .map(|o| o.breakdown.profit())
        .collect();
    let mean: f64 = profits.iter().zip(probs).map(|(p, w)| p * w).sum();
    let var: f64 = profits
        .iter()
        .zip(probs)
        .map(|(p, w)| w * (p - mean).powi(2))
        .sum();
    let costs: Vec<f64> = profits.iter().map(|p| -p).collect();
    let cost_cvar = cvar_of_samples(&costs, probs, alpha)?;

    let mut expected = CostBreakdown::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut throughput = DeviceThroughput::default();
    let mut pcc_import = 0.0;
    let mut withdrawal = 0.0;
    for (s, (o, &w)) in solution.outcomes.iter().zip(probs).enumerate() {
        let b = &o.breakdown;
        expected.dam_revenue += w * b.dam_revenue;
        expected.rcm_revenue += w * b.rcm_revenue;
        expected.ram_revenue += w * b.ram_revenue;
        expected.operations += w * b.operations;
        expected.tariff += w * b.tariff;
        expected.imbalance += w * b.imbalance;
        expected.total += w * b.total;
        let d = &o.dispatch;
        throughput.pv_kwh += w * sum_energy(&d.dg_power, dt);
        throughput.heat_pump_kwh += w * sum_energy(&d.hp_power, dt);
        throughput.ev_charge_kwh += w * sum_energy(&d.ev_charge, dt);
        throughput.ev_discharge_kwh += w * sum_energy(&d.ev_discharge, dt);
        throughput.bess_charge_kwh += w * sum_energy(&d.bess_charge, dt);
        throughput.bess_discharge_kwh += w * sum_energy(&d.bess_discharge, dt);
        pcc_import += w * d.pcc_kw.iter().sum::<f64>() * dt;
        withdrawal += w * sum_energy(&bus_withdrawals(model, scenarios, s, d), dt);
    }
    Ok(ProfitReport {
        expected_profit: mean,
        profit_std: var.sqrt(),
        cvar_alpha: alpha,
        cost_cvar,
        expected,
        scheduled_energy_kwh: solution.first_stage.dam_kw.iter().sum::<f64>() * dt,
        expected_pcc_import_kwh: pcc_import,
        expected_withdrawal_kwh: withdrawal,
        throughput,
        histogram: profit_histogram(&profits, probs, bins),
    })
}

/// Rebuilds a solution from stored bids and dispatch, recomputing every
/// cost stream by plain arithmetic rather than trusting the solver.
pub fn reevaluate(
    model: &VppModel,
    scenarios: &ScenarioSet,
    first_stage: FirstStageDecision,
    dispatch: Vec<DispatchSeries>,
    risk: RiskMeasure,
) -> Result<StochasticSolution> {
    if dispatch.len() != scenarios.len() {
        return Err(VppError::Length {
            what: "stored dispatch",
            expected: scenarios.len(),
            got: dispatch.len(),
        });
    }
    let outcomes: Vec<ScenarioOutcome> = scenarios
        .scenarios
        .iter()
        .zip(dispatch)
        .map(|(sc, d)| ScenarioOutcome {
            breakdown: model.recompute_breakdown(sc, &first_stage, &d),
            dispatch: d,
        })
        .collect();
    let probabilities = scenarios.probabilities();
    let costs: Vec<f64> = outcomes.iter().map(|o| o.breakdown.total).collect();
    let objective = risk.evaluate(&costs, &probabilities)?;
    Ok(StochasticSolution {
        first_stage,
        outcomes,
        objective,
        risk,
        probabilities,
    })
}

/// Clock-hour window `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockWindow {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub levels: Vec<f64>,
    /// Tariff scaled by `1 - level` here.
    pub low_window: ClockWindow,
    /// Tariff scaled by `1 + level` here.
    pub high_window: ClockWindow,
    pub method: SolveMethod,
    /// Solve levels concurrently.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            levels: (0..=10).map(|k| k as f64 / 10.0).collect(),
            low_window: ClockWindow {
                from: 10.0,
                to: 14.0,
            },
            high_window: ClockWindow {
                from: 17.0,
                to: 21.0,
            },
            method: SolveMethod::default(),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: f64,
    pub expected_profit: f64,
    /// Expected tariffed withdrawal in each window, summed over buses, kWh.
    pub low_window_withdrawal_kwh: f64,
    pub high_window_withdrawal_kwh: f64,
    /// Expected net PCC import in each window, kWh.
    pub low_window_import_kwh: f64,
    pub high_window_import_kwh: f64,
    /// Changes against the baseline (first) level, percent.
    pub profit_change_pct: f64,
    pub low_window_change_pct: f64,
    pub high_window_change_pct: f64,
    /// Expected net PCC import per step, kW.
    pub pcc_profile_kw: Vec<f64>,
    /// Set when this level failed to solve; the numeric fields are NaN.
    pub error: Option<String>,
}

/// Tariff schedule for one sweep level.
pub fn shifted_tariff(
    model: &VppModel,
    level: f64,
    low: ClockWindow,
    high: ClockWindow,
) -> Vec<f64> {
    let h = &model.horizon;
    model
        .market
        .tariff
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            if h.in_clock_window(t, low.from, low.to) {
                c * (1.0 - level)
            } else if h.in_clock_window(t, high.from, high.to) {
                c * (1.0 + level)
            } else {
                c
            }
        })
        .collect()
}

/// `100 (value - base) / |base|`; zero when both are zero.
pub fn percent_change(value: f64, base: f64) -> f64 {
    let delta = value - base;
    if delta == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::NAN
    } else {
        100.0 * delta / base.abs()
    }
}

#[derive(Debug, Clone)]
struct LevelResult {
    profit: f64,
    low_w: f64,
    high_w: f64,
    low_i: f64,
    high_i: f64,
    profile: Vec<f64>,
}

fn run_level(
    model: &VppModel,
    scenarios: &ScenarioSet,
    level: f64,
    cfg: &SweepConfig,
    warm: Option<&Basis>,
) -> Result<(LevelResult, Option<Basis>)> {
    let shifted = model.with_tariff(shifted_tariff(
        model,
        level,
        cfg.low_window,
        cfg.high_window,
    ))?;
    let (sol, basis) = match &cfg.method {
        SolveMethod::Extensive { max_rows } => {
            if let Some(limit) = *max_rows {
                let rows = rows_per_scenario(&shifted, scenarios)? * scenarios.len();
                if rows > limit {
                    return Err(VppError::SizeGuard { rows, limit });
                }
            }
            build_extensive(&shifted, scenarios, RiskMeasure::Expectation)?
                .solve_from(&shifted, scenarios, warm)?
        }
        SolveMethod::Benders(opts) => {
            let r = solve_benders(&shifted, scenarios, RiskMeasure::Expectation, opts)?;
            if !r.report.converged {
                return Err(VppError::NotConverged {
                    iterations: r.report.iterations,
                    gap: r.report.final_gap,
                });
            }
            (r.solution, None)
        }
    };
    let h = &shifted.horizon;
    let dt = h.step_hours;
    let mut out = LevelResult {
        profit: -sol.expected_cost(),
        low_w: 0.0,
        high_w: 0.0,
        low_i: 0.0,
        high_i: 0.0,
        profile: vec![0.0; h.steps],
    };
    for (s, (o, &w)) in sol.outcomes.iter().zip(&sol.probabilities).enumerate() {
        let wd = bus_withdrawals(&shifted, scenarios, s, &o.dispatch);
        for t in 0..h.steps {
            let total: f64 = wd.iter().map(|b| b[t]).sum::<f64>() * dt;
            let import = o.dispatch.pcc_kw[t] * dt;
            out.profile[t] += w * o.dispatch.pcc_kw[t];
            if h.in_clock_window(t, cfg.low_window.from, cfg.low_window.to) {
                out.low_w += w * total;
                out.low_i += w * import;
            } else if h.in_clock_window(t, cfg.high_window.from, cfg.high_window.to) {
                out.high_w += w * total;
                out.high_i += w * import;
            }
        }
    }
    Ok((out, basis))
}

fn row(level: f64, r: &Result<LevelResult>, base: &LevelResult) -> SweepRow {
    match r {
        Ok(r) => SweepRow {
            level,
            expected_profit: r.profit,
            low_window_withdrawal_kwh: r.low_w,
            high_window_withdrawal_kwh: r.high_w,
            low_window_import_kwh: r.low_i,
            high_window_import_kwh: r.high_i,
            profit_change_pct: percent_change(r.profit, base.profit),
            low_window_change_pct: percent_change(r.low_w, base.low_w),
            high_window_change_pct: percent_change(r.high_w, base.high_w),
            pcc_profile_kw: r.profile.clone(),
            error: None,
        },
        Err(e) => SweepRow {
            level,
            expected_profit: f64::NAN,
            low_window_withdrawal_kwh: f64::NAN,
            high_window_withdrawal_kwh: f64::NAN,
            low_window_import_kwh: f64::NAN,
            high_window_import_kwh: f64::NAN,
            profit_change_pct: f64::NAN,
            low_window_change_pct: f64::NAN,
            high_window_change_pct: f64::NAN,
            pcc_profile_kw: vec![f64::NAN; base.profile.len()],
            error: Some(e.to_string()),
        },
    }
}

/// Re-solves the risk-neutral problem at every tariff level on the same
/// scenario set and reports changes against the first level. A failing
/// baseline aborts the sweep; any other failing level is reported in its
/// row and the sweep continues.
pub fn sweep_tariff(
    model: &VppModel,
    scenarios: &ScenarioSet,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if cfg.levels.is_empty() {
        return Err(VppError::Config(
            "tariff sweep needs at least one level".into(),
        ));
    }
    if let Some(bad) = cfg.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(VppError::Config(format!(
            "tariff level {bad} outside [0, 1]"
        )));
    }
    for sc in &scenarios.scenarios {
        model.check_scenario(sc)?;
    }
    // Only objective coefficients change between levels, so the baseline's
    // optimal basis stays primal feasible for every other level. Starting
    // all of them from it keeps results independent of `parallel`.
    let (base, basis) = run_level(model, scenarios, cfg.levels[0], cfg, None)?;
    let solve_one = |&l: &f64| run_level(model, scenarios, l, cfg, basis.as_ref()).map(|r| r.0);
    let rest = &cfg.levels[1..];
    let others: Vec<Result<LevelResult>> = if cfg.parallel {
        rest.par_iter().map(solve_one).collect()
    } else {
        rest.iter().map(solve_one).collect()
    };
    let mut rows = vec![row(cfg.levels[0], &Ok(base.clone()), &base)];
    rows.extend(rest.iter().zip(&others).map(|(&l, r)| row(l, r, &base)));
    Ok(rows)
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_levels(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || VppError::Config(format!("levels must be start:stop:step, got `{spec}`"));
    let [a, b, c] = parts.as_slice() else {
        return Err(bad());
    };
    let (start, stop, step): (f64, f64, f64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    );
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // Multiply rather than accumulate so 0.1 steps land on 0.3, not 0.30000000000000004.
    Ok((0..=n)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_mass_sums_to_one() {
        let h = profit_histogram(&[1.0, 2.0, 3.0, 10.0], &[0.25; 4], 3);
        assert_eq!(h.len(), 3);
        let total: f64 = h.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(h[2].probability, 0.25);
    }

    #[test]
    fn histogram_of_constant_profits() {
        let h = profit_histogram(&[5.0, 5.0], &[0.5, 0.5], 4);
        assert_eq!(h[0].probability, 1.0);
    }

    #[test]
    fn percent_change_of_zero_baseline() {
        assert_eq!(percent_change(0.0, 0.0), 0.0);
        assert!(percent_change(1.0, 0.0).is_nan());
        assert_eq!(percent_change(-15.0, -10.0), -50.0);
    }

    #[test]
    fn levels_parse_inclusive() {
        let l = parse_levels("0:1:0.1").unwrap();
        assert_eq!(l.len(), 11);
        assert_eq!(l[3], 0.3);
        assert_eq!(l[10], 1.0);
        assert!(parse_levels("0:1").is_err());
        assert!(parse_levels("1:0:0.1").is_err());
    }
}
