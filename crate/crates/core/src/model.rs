//! The VPP model: horizon, feeder, DER park and market settings, and the
//! per-scenario constraint block shared by the extensive form and the
//! decomposition subproblems.

use serde::{Deserialize, Serialize};
use vpp_lp::{LinearProgram, LpStatus};

use crate::der::{emit_bess, emit_ev, emit_hp, emit_park, DerPark, ParkHandles};
use crate::error::{Result, VppError};
use crate::grid::{emit_distflow, polygon_halfplanes, GridHandles, RadialNetwork, Topology};
use crate::horizon::Horizon;
use crate::market::{
    emit_position_balance, emit_reserve_constraints, imbalance_cost, revenue_dam, revenue_ram,
    revenue_rcm, tariff_cost, BidCaps, CostBreakdown, CostExpressions, FirstStageDecision,
    FirstStageVars, MarketConfig, SecondStageVars, KW_PER_MW,
};
use crate::scenario::{Forecast, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct VppModel {
    pub horizon: Horizon,
    pub network: RadialNetwork,
    pub park: DerPark,
    pub market: MarketConfig,
    pub polygon_sides: usize,
    #[serde(skip)]
    topology: Topology,
}

impl VppModel {
    pub fn new(
        horizon: Horizon,
        network: RadialNetwork,
        park: DerPark,
        market: MarketConfig,
        polygon_sides: usize,
    ) -> Result<Self> {
        horizon.validate()?;
        let topology = network.validate()?;
        park.validate(&horizon, network.buses.len())?;
        polygon_halfplanes(polygon_sides)?;
        if !(market.prequalified_kw >= 0.0 && market.prequalified_kw.is_finite()) {
            return Err(VppError::Config(
                "prequalified power must be finite and nonnegative".into(),
            ));
        }
        if market.tariff.len() != horizon.steps {
            return Err(VppError::Length {
                what: "tariff schedule",
                expected: horizon.steps,
                got: market.tariff.len(),
            });
        }
        if let Some(cap) = market.dam_bid_cap_kw {
            if !(cap >= 0.0 && cap.is_finite()) {
                return Err(VppError::Config(
                    "day-ahead bid cap must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(VppModel {
            horizon,
            network,
            park,
            market,
            polygon_sides,
            topology,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_buses(&self) -> usize {
        self.network.buses.len()
    }

    /// Copy of the model with a different per-step tariff.
    pub fn with_tariff(&self, tariff: Vec<f64>) -> Result<Self> {
        let mut market = self.market.clone();
        market.tariff = tariff;
        VppModel::new(
            self.horizon.clone(),
            self.network.clone(),
            self.park.clone(),
            market,
            self.polygon_sides,
        )
    }

    pub fn with_prequalified(&self, kw: f64) -> Result<Self> {
        let mut market = self.market.clone();
        market.prequalified_kw = kw;
        VppModel::new(
            self.horizon.clone(),
            self.network.clone(),
            self.park.clone(),
            market,
            self.polygon_sides,
        )
    }

    /// Day-ahead bids are capped at the park's combined export and import
    /// envelope plus 1.5× the peak load; anything larger could only settle
    /// as imbalance.
    pub fn bid_caps(&self) -> BidCaps {
        let dam = self.market.dam_bid_cap_kw.unwrap_or_else(|| {
            let (export, import) = self.park.power_envelope();
            let load: f64 = self
                .network
                .buses
                .iter()
                .map(|b| b.peak_load_kw.abs())
                .sum();
            export + import + 1.5 * load
        });
        BidCaps {
            dam_kw: dam,
            reserve_kw: self.market.prequalified_kw,
        }
    }

    pub fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        scenario
            .series
            .validate(&self.horizon, self.park.dgs.len(), self.num_buses())?;
        if scenario.imbalance_short.len() != self.horizon.steps
            || scenario.imbalance_long.len() != self.horizon.steps
        {
            return Err(VppError::Length {
                what: "imbalance prices",
                expected: self.horizon.steps,
                got: scenario.imbalance_short.len(),
            });
        }
        if !(scenario.probability > 0.0) {
            return Err(VppError::Scenario(
                "scenario probability must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Emits all physical and financial constraints of one scenario against
    /// the given first-stage variables.
    pub fn emit_scenario(
        &self,
        program: &mut LinearProgram,
        scenario: &Scenario,
        first: &FirstStageVars,
        tag: &str,
    ) -> Result<ScenarioBlock> {
        self.check_scenario(scenario)?;
        let h = &self.horizon;
        let dt = h.step_hours;
        let s = &scenario.series;
        let park = emit_park(program, &self.park, s, h, self.num_buses(), tag)?;
        let grid = emit_distflow(
            program,
            &self.network,
            &self.topology,
            &park,
            &s.load_p,
            &s.load_q,
            h,
            self.polygon_sides,
            tag,
        )?;
        let market = SecondStageVars::declare(program, h, self.market.prequalified_kw, tag)?;
        emit_reserve_constraints(program, h, first, &market, tag)?;
        emit_position_balance(program, first, &market, &grid.pcc, tag)?;
        let costs = CostExpressions {
            dam_revenue: revenue_dam(&s.day_ahead, &first.dam, dt)?,
            rcm_revenue: revenue_rcm(&s.rcm_up, &s.rcm_dn, &first.rcm_up, &first.rcm_dn)?,
            ram_revenue: revenue_ram(&s.ram_up, &s.ram_dn, &market.ram_up, &market.ram_dn, dt)?,
            operations: park.operating_cost(),
            tariff: tariff_cost(&grid.withdrawal, &self.market.tariff, dt)?,
            imbalance: imbalance_cost(
                &market.imb_short,
                &market.imb_long,
                &scenario.imbalance_short,
                &scenario.imbalance_long,
                dt,
            )?,
        };
        Ok(ScenarioBlock {
            park,
            grid,
            market,
            costs,
        })
    }

    /// Solves each heat pump and EV alone to name a device whose own
    /// constraints cannot be met in this scenario.
    pub fn diagnose_devices(&self, scenario: &Scenario) -> Option<String> {
        let h = &self.horizon;
        for hp in &self.park.hps {
            let mut p = LinearProgram::new();
            if emit_hp(&mut p, hp, &scenario.series.ambient_temp, h, "").is_err() {
                return Some(hp.id.clone());
            }
            if !matches!(p.solve().map(|s| s.status), Ok(LpStatus::Optimal)) {
                return Some(format!("heat pump {}", hp.id));
            }
        }
        for ev in &self.park.evs {
            let mut p = LinearProgram::new();
            if emit_ev(&mut p, ev, &scenario.series.ev_availability, h, "").is_err() {
                return Some(ev.id.clone());
            }
            if !matches!(p.solve().map(|s| s.status), Ok(LpStatus::Optimal)) {
                return Some(format!("ev event {}", ev.id));
            }
        }
        for b in &self.park.bess {
            let mut p = LinearProgram::new();
            if emit_bess(&mut p, b, h, "").is_err() {
                return Some(b.id.clone());
            }
        }
        None
    }

    /// Net active injection per bus and step (kW) implied by a dispatch.
    pub fn injections(&self, series: &Forecast, d: &DispatchSeries) -> Vec<Vec<f64>> {
        let steps = self.horizon.steps;
        let mut inj: Vec<Vec<f64>> = series
            .load_p
            .iter()
            .map(|l| l.iter().map(|v| -v).collect())
            .collect();
        for (k, dg) in self.park.dgs.iter().enumerate() {
            for t in 0..steps {
                inj[dg.bus][t] += d.dg_power[k][t];
            }
        }
        for (k, hp) in self.park.hps.iter().enumerate() {
            for t in 0..steps {
                inj[hp.bus][t] -= d.hp_power[k][t];
            }
        }
        for (k, ev) in self.park.evs.iter().enumerate() {
            for t in 0..steps {
                inj[ev.bus][t] += d.ev_discharge[k][t] - d.ev_charge[k][t];
            }
        }
        for (k, b) in self.park.bess.iter().enumerate() {
            for t in 0..steps {
                inj[b.bus][t] += d.bess_discharge[k][t] - d.bess_charge[k][t];
            }
        }
        inj
    }

    /// Recomputes every cost stream from bids and dispatch by plain
    /// arithmetic, without the LP expressions.
    pub fn recompute_breakdown(
        &self,
        scenario: &Scenario,
        first: &FirstStageDecision,
        d: &DispatchSeries,
    ) -> CostBreakdown {
        let dt = self.horizon.step_hours;
        let s = &scenario.series;
        let steps = self.horizon.steps;
        let dam: f64 = (0..steps)
            .map(|t| s.day_ahead[t] * first.dam_kw[t] * dt)
            .sum::<f64>()
            / KW_PER_MW;
        let rcm: f64 = (0..self.horizon.num_windows())
            .map(|w| s.rcm_up[w] * first.rcm_up_kw[w] + s.rcm_dn[w] * first.rcm_dn_kw[w])
            .sum::<f64>()
            / KW_PER_MW;
        let ram: f64 = (0..steps)
            .map(|t| (s.ram_up[t] * d.ram_up[t] + s.ram_dn[t] * d.ram_dn[t]) * dt)
            .sum::<f64>()
            / KW_PER_MW;
        let mut ops = 0.0;
        for (k, g) in self.park.dgs.iter().enumerate() {
            ops += d.dg_power[k]
                .iter()
                .map(|p| p * g.marginal_cost * dt)
                .sum::<f64>();
        }
        for (k, e) in self.park.evs.iter().enumerate() {
            ops += d.ev_discharge[k]
                .iter()
                .map(|p| p * e.discharge_cost * dt)
                .sum::<f64>();
        }
        for (k, b) in self.park.bess.iter().enumerate() {
            ops += (0..steps)
                .map(|t| (d.bess_charge[k][t] + d.bess_discharge[k][t]) * b.cycle_cost * dt)
                .sum::<f64>();
        }
        let inj = self.injections(s, d);
        let tariff: f64 = (0..steps)
            .map(|t| {
                inj.iter().map(|bus| (-bus[t]).max(0.0)).sum::<f64>() * self.market.tariff[t] * dt
            })
            .sum::<f64>()
            / KW_PER_MW;
        let imb: f64 = (0..steps)
            .map(|t| {
                (scenario.imbalance_short[t] * d.imb_short[t]
                    - scenario.imbalance_long[t] * d.imb_long[t])
                    * dt
            })
            .sum::<f64>()
            / KW_PER_MW;
        CostBreakdown::new(dam, rcm, ram, ops, tariff, imb)
    }
}

/// Handles of one emitted scenario.
#[derive(Debug, Clone)]
pub struct ScenarioBlock {
    pub park: ParkHandles,
    pub grid: GridHandles,
    pub market: SecondStageVars,
    pub costs: CostExpressions,
}

/// Second-stage values of one scenario over the horizon. Device series are
/// indexed `[device][t]` in park order; EV values outside the stay are zero
/// power and a held state of charge.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchSeries {
    pub ram_up: Vec<f64>,
    pub ram_dn: Vec<f64>,
    pub imb_short: Vec<f64>,
    pub imb_long: Vec<f64>,
    pub pcc_kw: Vec<f64>,
    /// Sum of bus withdrawals, kW.
    pub withdrawal_kw: Vec<f64>,
    pub dg_power: Vec<Vec<f64>>,
    pub hp_power: Vec<Vec<f64>>,
    pub hp_temp: Vec<Vec<f64>>,
    pub ev_charge: Vec<Vec<f64>>,
    pub ev_discharge: Vec<Vec<f64>>,
    pub ev_soc: Vec<Vec<f64>>,
    pub bess_charge: Vec<Vec<f64>>,
    pub bess_discharge: Vec<Vec<f64>>,
    pub bess_soc: Vec<Vec<f64>>,
}

impl ScenarioBlock {
    pub fn dispatch(&self, model: &VppModel, primal: &[f64]) -> DispatchSeries {
        let val = |v: &[vpp_lp::VarId]| -> Vec<f64> { v.iter().map(|x| primal[x.0]).collect() };
        let steps = model.horizon.steps;
        let withdrawal_kw = (0..steps)
            .map(|t| self.grid.withdrawal.iter().map(|b| primal[b[t].0]).sum())
            .collect();
        let mut ev_charge = Vec::new();
        let mut ev_discharge = Vec::new();
        let mut ev_soc = Vec::new();
        for (h, ev) in self.park.ev.iter().zip(&model.park.evs) {
            let mut ch = vec![0.0; steps];
            let mut dis = vec![0.0; steps];
            let mut soc = vec![ev.arrival_soc_kwh; steps];
            let mut level = ev.arrival_soc_kwh;
            for t in 0..steps {
                if h.window.contains(&t) {
                    let k = t - h.window.start;
                    ch[t] = primal[h.charge[k].0];
                    dis[t] = primal[h.discharge[k].0];
                    level = primal[h.soc[k].0];
                }
                soc[t] = level;
            }
            ev_charge.push(ch);
            ev_discharge.push(dis);
            ev_soc.push(soc);
        }
        DispatchSeries {
            ram_up: val(&self.market.ram_up),
            ram_dn: val(&self.market.ram_dn),
            imb_short: val(&self.market.imb_short),
            imb_long: val(&self.market.imb_long),
            pcc_kw: val(&self.grid.pcc),
            withdrawal_kw,
            dg_power: self.park.dg.iter().map(|h| val(&h.p)).collect(),
            hp_power: self.park.hp.iter().map(|h| val(&h.p)).collect(),
            hp_temp: self.park.hp.iter().map(|h| val(&h.temp)).collect(),
            ev_charge,
            ev_discharge,
            ev_soc,
            bess_charge: self.park.bess.iter().map(|h| val(&h.charge)).collect(),
            bess_discharge: self.park.bess.iter().map(|h| val(&h.discharge)).collect(),
            bess_soc: self.park.bess.iter().map(|h| val(&h.soc)).collect(),
        }
    }
}

/// Solved second stage of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub breakdown: CostBreakdown,
    pub dispatch: DispatchSeries,
}
