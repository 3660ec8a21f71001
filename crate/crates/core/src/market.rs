//! Market variables, revenue and cost expressions, reserve constraints and
//! the position balance.
//!
//! Conventions: costs are positive and profit is `-cost`. Day-ahead bids
//! are export-positive kW; the PCC exchange is import-positive, so the
//! VPP's delivered power is `-pcc`. Prices are per MWh (capacity per MW and
//! window), hence the `/1000` on every kW term.

use serde::{Deserialize, Serialize};
use vpp_lp::{LinExpr, LinearProgram, Sense, VarId};

use crate::error::{Result, VppError};
use crate::horizon::Horizon;

pub const KW_PER_MW: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Prequalified reserve power in kW.
    pub prequalified_kw: f64,
    /// Network tariff per step, currency/MWh.
    pub tariff: Vec<f64>,
    /// Symmetric cap on day-ahead bids in kW; derived from the park when absent.
    #[serde(default)]
    pub dam_bid_cap_kw: Option<f64>,
}

/// Bounds on first-stage bids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidCaps {
    pub dam_kw: f64,
    pub reserve_kw: f64,
}

#[derive(Debug, Clone)]
pub struct FirstStageVars {
    pub dam: Vec<VarId>,
    pub rcm_up: Vec<VarId>,
    pub rcm_dn: Vec<VarId>,
}

impl FirstStageVars {
    /// Declares bid variables with the caps as bounds.
    pub fn declare(program: &mut LinearProgram, horizon: &Horizon, caps: BidCaps) -> Result<Self> {
        Self::declare_with(
            program,
            horizon,
            |_| (-caps.dam_kw, caps.dam_kw),
            (0.0, caps.reserve_kw),
        )
    }

    /// Declares free copies, to be pinned by equality rows.
    pub fn declare_free(program: &mut LinearProgram, horizon: &Horizon) -> Result<Self> {
        let inf = f64::INFINITY;
        Self::declare_with(program, horizon, |_| (-inf, inf), (-inf, inf))
    }

    fn declare_with(
        program: &mut LinearProgram,
        horizon: &Horizon,
        dam_bounds: impl Fn(usize) -> (f64, f64),
        reserve_bounds: (f64, f64),
    ) -> Result<Self> {
        let mut dam = Vec::with_capacity(horizon.steps);
        for t in 0..horizon.steps {
            let (lo, hi) = dam_bounds(t);
            dam.push(program.add_variable(lo, hi, format!("dam_{t}"))?);
        }
        let w = horizon.num_windows();
        let (lo, hi) = reserve_bounds;
        let mut rcm_up = Vec::with_capacity(w);
        let mut rcm_dn = Vec::with_capacity(w);
        for k in 0..w {
            rcm_up.push(program.add_variable(lo, hi, format!("rcm_up_{k}"))?);
        }
        for k in 0..w {
            rcm_dn.push(program.add_variable(lo, hi, format!("rcm_dn_{k}"))?);
        }
        Ok(FirstStageVars {
            dam,
            rcm_up,
            rcm_dn,
        })
    }

    /// All bid variables in the canonical order: day-ahead, reserve up, reserve down.
    pub fn all(&self) -> Vec<VarId> {
        self.dam
            .iter()
            .chain(&self.rcm_up)
            .chain(&self.rcm_dn)
            .copied()
            .collect()
    }

    pub fn values(&self, primal: &[f64]) -> FirstStageDecision {
        let get = |v: &[VarId]| v.iter().map(|x| primal[x.0]).collect();
        FirstStageDecision {
            dam_kw: get(&self.dam),
            rcm_up_kw: get(&self.rcm_up),
            rcm_dn_kw: get(&self.rcm_dn),
        }
    }
}

/// Realized bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageDecision {
    pub dam_kw: Vec<f64>,
    pub rcm_up_kw: Vec<f64>,
    pub rcm_dn_kw: Vec<f64>,
}

impl FirstStageDecision {
    pub fn zeros(horizon: &Horizon) -> Self {
        let w = horizon.num_windows();
        FirstStageDecision {
            dam_kw: vec![0.0; horizon.steps],
            rcm_up_kw: vec![0.0; w],
            rcm_dn_kw: vec![0.0; w],
        }
    }

    /// Flattened in the order of [`FirstStageVars::all`].
    pub fn to_vec(&self) -> Vec<f64> {
        self.dam_kw
            .iter()
            .chain(&self.rcm_up_kw)
            .chain(&self.rcm_dn_kw)
            .copied()
            .collect()
    }

    pub fn from_vec(horizon: &Horizon, x: &[f64]) -> Result<Self> {
        let t = horizon.steps;
        let w = horizon.num_windows();
        if x.len() != t + 2 * w {
            return Err(VppError::Length {
                what: "first-stage vector",
                expected: t + 2 * w,
                got: x.len(),
            });
        }
        Ok(FirstStageDecision {
            dam_kw: x[..t].to_vec(),
            rcm_up_kw: x[t..t + w].to_vec(),
            rcm_dn_kw: x[t + w..].to_vec(),
        })
    }

    pub fn max_abs_diff(&self, other: &FirstStageDecision) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SecondStageVars {
    pub ram_up: Vec<VarId>,
    pub ram_dn: Vec<VarId>,
    pub imb_short: Vec<VarId>,
    pub imb_long: Vec<VarId>,
}

impl SecondStageVars {
    pub fn declare(
        program: &mut LinearProgram,
        horizon: &Horizon,
        prequalified_kw: f64,
        tag: &str,
    ) -> Result<Self> {
        let n = horizon.steps;
        let mut v = SecondStageVars {
            ram_up: Vec::with_capacity(n),
            ram_dn: Vec::with_capacity(n),
            imb_short: Vec::with_capacity(n),
            imb_long: Vec::with_capacity(n),
        };
        for t in 0..n {
            v.ram_up.push(program.add_variable(
                0.0,
                prequalified_kw,
                format!("{tag}ram_up_{t}"),
            )?);
            v.ram_dn.push(program.add_variable(
                0.0,
                prequalified_kw,
                format!("{tag}ram_dn_{t}"),
            )?);
            v.imb_short.push(program.add_variable(
                0.0,
                f64::INFINITY,
                format!("{tag}imb_short_{t}"),
            )?);
            v.imb_long.push(program.add_variable(
                0.0,
                f64::INFINITY,
                format!("{tag}imb_long_{t}"),
            )?);
        }
        Ok(v)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(VppError::Length {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Day-ahead revenue `Σ ρ_t P_t Δt / 1000`.
pub fn revenue_dam(prices: &[f64], bids: &[VarId], step_hours: f64) -> Result<LinExpr> {
    check_len("day-ahead prices", bids.len(), prices.len())?;
    let mut e = LinExpr::new();
    for (&p, &v) in prices.iter().zip(bids) {
        e.add_term(v, p * step_hours / KW_PER_MW);
    }
    Ok(e)
}

/// Reserve capacity revenue, priced per window without a duration factor.
pub fn revenue_rcm(
    up_prices: &[f64],
    dn_prices: &[f64],
    up: &[VarId],
    dn: &[VarId],
) -> Result<LinExpr> {
    check_len("reserve capacity up prices", up.len(), up_prices.len())?;
    check_len("reserve capacity down prices", dn.len(), dn_prices.len())?;
    let mut e = LinExpr::new();
    for (&p, &v) in up_prices.iter().zip(up) {
        e.add_term(v, p / KW_PER_MW);
    }
    for (&p, &v) in dn_prices.iter().zip(dn) {
        e.add_term(v, p / KW_PER_MW);
    }
    Ok(e)
}

/// Activation revenue; both directions are remunerated at their own price.
pub fn revenue_ram(
    up_prices: &[f64],
    dn_prices: &[f64],
    up: &[VarId],
    dn: &[VarId],
    step_hours: f64,
) -> Result<LinExpr> {
    check_len("activation up prices", up.len(), up_prices.len())?;
    check_len("activation down prices", dn.len(), dn_prices.len())?;
    let mut e = LinExpr::new();
    for t in 0..up.len() {
        e.add_term(up[t], up_prices[t] * step_hours / KW_PER_MW);
        e.add_term(dn[t], dn_prices[t] * step_hours / KW_PER_MW);
    }
    Ok(e)
}

/// Network tariff on every bus's withdrawal.
pub fn tariff_cost(withdrawal: &[Vec<VarId>], tariff: &[f64], step_hours: f64) -> Result<LinExpr> {
    let mut e = LinExpr::new();
    for bus in withdrawal {
        check_len("tariff schedule", bus.len(), tariff.len())?;
        for (&v, &c) in bus.iter().zip(tariff) {
            if c != 0.0 {
                e.add_term(v, c * step_hours / KW_PER_MW);
            }
        }
    }
    Ok(e)
}

/// Imbalance settlement: short positions pay, long positions are paid.
pub fn imbalance_cost(
    short: &[VarId],
    long: &[VarId],
    short_price: &[f64],
    long_price: &[f64],
    step_hours: f64,
) -> Result<LinExpr> {
    check_len("short imbalance prices", short.len(), short_price.len())?;
    check_len("long imbalance prices", long.len(), long_price.len())?;
    let mut e = LinExpr::new();
    for t in 0..short.len() {
        e.add_term(short[t], short_price[t] * step_hours / KW_PER_MW);
        e.add_term(long[t], -long_price[t] * step_hours / KW_PER_MW);
    }
    Ok(e)
}

/// Activations must cover the booked capacity of their window; their upper
/// bound (prequalified power) is carried by the variable bounds.
pub fn emit_reserve_constraints(
    program: &mut LinearProgram,
    horizon: &Horizon,
    first: &FirstStageVars,
    second: &SecondStageVars,
    tag: &str,
) -> Result<()> {
    for t in 0..horizon.steps {
        let w = horizon.window_of(t);
        program.add_constraint(
            vec![(second.ram_up[t], 1.0), (first.rcm_up[w], -1.0)],
            Sense::Ge,
            0.0,
            format!("{tag}ram_cover_up_{t}"),
        )?;
        program.add_constraint(
            vec![(second.ram_dn[t], 1.0), (first.rcm_dn[w], -1.0)],
            Sense::Ge,
            0.0,
            format!("{tag}ram_cover_dn_{t}"),
        )?;
    }
    Ok(())
}

/// `-pcc = dam + ram_up - ram_dn - short + long` for every step.
pub fn emit_position_balance(
    program: &mut LinearProgram,
    first: &FirstStageVars,
    second: &SecondStageVars,
    pcc: &[VarId],
    tag: &str,
) -> Result<()> {
    for t in 0..pcc.len() {
        program.add_constraint(
            vec![
                (pcc[t], -1.0),
                (first.dam[t], -1.0),
                (second.ram_up[t], -1.0),
                (second.ram_dn[t], 1.0),
                (second.imb_short[t], 1.0),
                (second.imb_long[t], -1.0),
            ],
            Sense::Eq,
            0.0,
            format!("{tag}position_{t}"),
        )?;
    }
    Ok(())
}

/// The six streams of one scenario's net cost as linear expressions.
#[derive(Debug, Clone)]
pub struct CostExpressions {
    pub dam_revenue: LinExpr,
    pub rcm_revenue: LinExpr,
    pub ram_revenue: LinExpr,
    pub operations: LinExpr,
    pub tariff: LinExpr,
    pub imbalance: LinExpr,
}

impl CostExpressions {
    pub fn total(&self) -> LinExpr {
        let mut e = LinExpr::new();
        e.add_expr(&self.dam_revenue, -1.0)
            .add_expr(&self.rcm_revenue, -1.0)
            .add_expr(&self.ram_revenue, -1.0)
            .add_expr(&self.operations, 1.0)
            .add_expr(&self.tariff, 1.0)
            .add_expr(&self.imbalance, 1.0);
        e.compact()
    }

    pub fn evaluate(&self, primal: &[f64]) -> CostBreakdown {
        CostBreakdown::new(
            self.dam_revenue.evaluate(primal),
            self.rcm_revenue.evaluate(primal),
            self.ram_revenue.evaluate(primal),
            self.operations.evaluate(primal),
            self.tariff.evaluate(primal),
            self.imbalance.evaluate(primal),
        )
    }
}

/// Per-scenario revenues and costs in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub dam_revenue: f64,
    pub rcm_revenue: f64,
    pub ram_revenue: f64,
    pub operations: f64,
    pub tariff: f64,
    pub imbalance: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(dam: f64, rcm: f64, ram: f64, operations: f64, tariff: f64, imbalance: f64) -> Self {
        CostBreakdown {
            dam_revenue: dam,
            rcm_revenue: rcm,
            ram_revenue: ram,
            operations,
            tariff,
            imbalance,
            total: total_cost(dam, rcm, ram, operations, tariff, imbalance),
        }
    }

    pub fn profit(&self) -> f64 {
        -self.total
    }
}

pub fn total_cost(
    dam: f64,
    rcm: f64,
    ram: f64,
    operations: f64,
    tariff: f64,
    imbalance: f64,
) -> f64 {
    -(dam + rcm + ram) + operations + tariff + imbalance
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(p: &mut LinearProgram, n: usize) -> Vec<VarId> {
        (0..n)
            .map(|i| {
                p.add_variable(f64::NEG_INFINITY, f64::INFINITY, format!("v{i}"))
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn dam_revenue_cases() {
        let mut p = LinearProgram::new();
        let v = vars(&mut p, 2);
        let e = revenue_dam(&[50.0, 100.0], &v, 0.25).unwrap();
        assert_eq!(e.evaluate(&[0.0, 0.0]), 0.0);
        assert!(e.evaluate(&[2.0, -1.0]).abs() < 1e-15);
        let e = revenue_dam(&[206.5], &v[..1], 1.0).unwrap();
        assert!((e.evaluate(&[1000.0]) - 206.5).abs() < 1e-12);
        assert!(revenue_dam(&[1.0], &v, 1.0).is_err());
    }

    #[test]
    fn rcm_revenue_has_no_duration() {
        let mut p = LinearProgram::new();
        let v = vars(&mut p, 4);
        let e = revenue_rcm(&[3.30], &[0.0], &v[..1], &v[1..2]).unwrap();
        assert!((e.evaluate(&[1000.0, 0.0, 0.0, 0.0]) - 3.30).abs() < 1e-12);
        let e = revenue_rcm(&[2.0, 4.0], &[1.0, 3.0], &v[..2], &v[2..]).unwrap();
        let x = [100.0, 200.0, 300.0, 400.0];
        let expected = (2.0 * 100.0 + 4.0 * 200.0 + 1.0 * 300.0 + 3.0 * 400.0) / 1000.0;
        assert!((e.evaluate(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn ram_revenue_both_directions_add() {
        let mut p = LinearProgram::new();
        let v = vars(&mut p, 2);
        let e = revenue_ram(&[32.08], &[21.25], &v[..1], &v[1..], 0.25).unwrap();
        assert!((e.evaluate(&[1000.0, 0.0]) - 8.02).abs() < 1e-12);
        assert!((e.evaluate(&[1000.0, 1000.0]) - (8.02 + 5.3125)).abs() < 1e-12);
    }

    #[test]
    fn tariff_on_withdrawal() {
        let mut p = LinearProgram::new();
        let v = vars(&mut p, 1);
        let e = tariff_cost(std::slice::from_ref(&v), &[206.5], 1.0).unwrap();
        assert!((e.evaluate(&[1000.0]) - 206.5).abs() < 1e-12);
        assert_eq!(e.evaluate(&[0.0]), 0.0);
    }

    #[test]
    fn imbalance_signs() {
        let mut p = LinearProgram::new();
        let v = vars(&mut p, 2);
        let e = imbalance_cost(&v[..1], &v[1..], &[150.0], &[60.0], 0.25).unwrap();
        assert!((e.evaluate(&[1000.0, 0.0]) - 37.5).abs() < 1e-12);
        assert!(e.evaluate(&[0.0, 1000.0]) < 0.0);
        assert_eq!(e.evaluate(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn total_sign_convention() {
        assert_eq!(total_cost(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(total_cost(6.0, 3.0, 1.0, 2.0, 1.0, 1.0), -6.0);
    }

    #[test]
    fn reserve_cover_rows_per_window_step() {
        let hz = Horizon::new(8, 1.0, 4.0, 0.0).unwrap();
        let mut p = LinearProgram::new();
        let caps = BidCaps {
            dam_kw: 10.0,
            reserve_kw: 10.0,
        };
        let first = FirstStageVars::declare(&mut p, &hz, caps).unwrap();
        let second = SecondStageVars::declare(&mut p, &hz, 10.0, "").unwrap();
        emit_reserve_constraints(&mut p, &hz, &first, &second, "").unwrap();
        let rows: Vec<_> = p
            .constraints()
            .iter()
            .filter(|c| c.terms.iter().any(|&(v, _)| v == first.rcm_up[1]))
            .collect();
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn first_stage_vector_round_trip() {
        let hz = Horizon::new(8, 1.0, 4.0, 0.0).unwrap();
        let d = FirstStageDecision {
            dam_kw: (0..8).map(|v| v as f64).collect(),
            rcm_up_kw: vec![1.0, 2.0],
            rcm_dn_kw: vec![3.0, 4.0],
        };
        assert_eq!(FirstStageDecision::from_vec(&hz, &d.to_vec()).unwrap(), d);
        assert!(FirstStageDecision::from_vec(&hz, &[0.0; 3]).is_err());
    }
}
