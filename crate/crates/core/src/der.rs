//! Device models for PV generators, heat pumps, EV charging events and
//! batteries. Every device is emitted into a [`LinearProgram`] for one
//! scenario and returns its variable handles and linear operating cost.
//!
//! Powers are in kW, energies in kWh, costs in currency per kWh.
//! Storage recurrences use fixed charge/discharge efficiencies; the heat
//! pump is a first-order RC building with constant COP.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use vpp_lp::{LinExpr, LinearProgram, Sense, VarId};

use crate::error::{Result, VppError};
use crate::horizon::Horizon;
use crate::scenario::Forecast;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedGenerator {
    pub id: String,
    pub bus: usize,
    pub nominal_kw: f64,
    pub inverter_kva: f64,
    /// Currency per kWh generated.
    pub marginal_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatPump {
    pub id: String,
    pub bus: usize,
    pub max_elec_kw: f64,
    pub cop: f64,
    /// K per kW.
    pub resistance: f64,
    /// kWh per K.
    pub capacitance: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
    pub initial_temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvChargingEvent {
    pub id: String,
    pub bus: usize,
    /// First step the vehicle is plugged in.
    pub arrival: usize,
    /// First step after the vehicle leaves.
    pub departure: usize,
    pub battery_kwh: f64,
    pub arrival_soc_kwh: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    /// Required average net grid-side charging power over the stay.
    pub min_avg_charge_kw: f64,
    /// Compensation paid to the owner per kWh discharged.
    #[serde(default)]
    pub discharge_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bess {
    pub id: String,
    pub bus: usize,
    pub energy_kwh: f64,
    pub max_power_kw: f64,
    pub inverter_kva: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    pub initial_soc_kwh: f64,
    /// Currency per kWh of charge plus discharge throughput.
    pub cycle_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DerPark {
    pub dgs: Vec<DistributedGenerator>,
    pub hps: Vec<HeatPump>,
    pub evs: Vec<EvChargingEvent>,
    pub bess: Vec<Bess>,
}

fn invalid(id: &str, reason: impl Into<String>) -> VppError {
    VppError::Device {
        id: id.to_owned(),
        reason: reason.into(),
    }
}

fn check_eff(id: &str, eff: f64) -> Result<()> {
    if !(eff > 0.0 && eff <= 1.0) {
        return Err(invalid(id, format!("efficiency {eff} outside (0, 1]")));
    }
    Ok(())
}

fn check_nonneg(id: &str, what: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(
            id,
            format!("{what} must be finite and nonnegative, got {v}"),
        ));
    }
    Ok(())
}

impl DistributedGenerator {
    pub fn validate(&self) -> Result<()> {
        check_nonneg(&self.id, "nominal power", self.nominal_kw)?;
        check_nonneg(&self.id, "marginal cost", self.marginal_cost)?;
        if self.nominal_kw > self.inverter_kva {
            return Err(invalid(&self.id, "nominal power exceeds inverter rating"));
        }
        Ok(())
    }

    pub fn reactive_limit(&self) -> f64 {
        reactive_box(self.inverter_kva, self.nominal_kw)
    }
}

impl HeatPump {
    pub fn validate(&self) -> Result<()> {
        check_nonneg(&self.id, "electric power", self.max_elec_kw)?;
        if !(self.resistance > 0.0 && self.capacitance > 0.0 && self.cop > 0.0) {
            return Err(invalid(
                &self.id,
                "resistance, capacitance and COP must be positive",
            ));
        }
        if !(self.comfort_min <= self.initial_temp && self.initial_temp <= self.comfort_max) {
            return Err(invalid(
                &self.id,
                "initial temperature outside the comfort band",
            ));
        }
        Ok(())
    }

    /// Indoor temperature after one step from `temp` under constant inputs.
    pub fn step(&self, temp: f64, ambient: f64, power_kw: f64, hours: f64) -> f64 {
        temp + hours / self.capacitance * ((ambient - temp) / self.resistance + self.cop * power_kw)
    }
}

impl EvChargingEvent {
    pub fn validate(&self, horizon: &Horizon) -> Result<()> {
        if self.arrival >= self.departure {
            return Err(invalid(&self.id, "arrival must precede departure"));
        }
        if self.departure > horizon.steps {
            return Err(invalid(
                &self.id,
                format!(
                    "window {}..{} exceeds the {}-step horizon",
                    self.arrival, self.departure, horizon.steps
                ),
            ));
        }
        if !(0.0..=self.battery_kwh).contains(&self.arrival_soc_kwh) {
            return Err(invalid(
                &self.id,
                "arrival state of charge outside [0, capacity]",
            ));
        }
        check_eff(&self.id, self.charge_eff)?;
        check_eff(&self.id, self.discharge_eff)?;
        check_nonneg(&self.id, "charge power", self.max_charge_kw)?;
        check_nonneg(&self.id, "discharge power", self.max_discharge_kw)?;
        check_nonneg(&self.id, "minimum average charge", self.min_avg_charge_kw)?;
        check_nonneg(&self.id, "discharge cost", self.discharge_cost)?;
        Ok(())
    }

    pub fn window(&self) -> Range<usize> {
        self.arrival..self.departure
    }
}

impl Bess {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=self.energy_kwh).contains(&self.initial_soc_kwh) {
            return Err(invalid(
                &self.id,
                "initial state of charge outside [0, capacity]",
            ));
        }
        check_eff(&self.id, self.charge_eff)?;
        check_eff(&self.id, self.discharge_eff)?;
        check_nonneg(&self.id, "power", self.max_power_kw)?;
        check_nonneg(&self.id, "cycle cost", self.cycle_cost)?;
        Ok(())
    }

    pub fn reactive_limit(&self) -> f64 {
        reactive_box(self.inverter_kva, self.max_power_kw)
    }
}

/// Half-width of the square reactive box that fits inside the inverter
/// circle alongside full active power.
fn reactive_box(rating: f64, active: f64) -> f64 {
    if rating > active {
        (rating * rating - active * active).sqrt()
    } else {
        0.0
    }
}

impl DerPark {
    pub fn validate(&self, horizon: &Horizon, num_buses: usize) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        let mut check_common = |id: &str, bus: usize| -> Result<()> {
            if bus >= num_buses {
                return Err(invalid(id, format!("bus {bus} does not exist")));
            }
            if !ids.insert(id.to_owned()) {
                return Err(invalid(id, "duplicate device id"));
            }
            Ok(())
        };
        for d in &self.dgs {
            check_common(&d.id, d.bus)?;
            d.validate()?;
        }
        for h in &self.hps {
            check_common(&h.id, h.bus)?;
            h.validate()?;
        }
        for e in &self.evs {
            check_common(&e.id, e.bus)?;
            e.validate(horizon)?;
        }
        for b in &self.bess {
            check_common(&b.id, b.bus)?;
            b.validate()?;
        }
        Ok(())
    }

    /// Largest power the park could export (positive) or import (negative
    /// magnitude) at any step, ignoring the network.
    pub fn power_envelope(&self) -> (f64, f64) {
        let export: f64 = self.dgs.iter().map(|d| d.nominal_kw).sum::<f64>()
            + self.bess.iter().map(|b| b.max_power_kw).sum::<f64>()
            + self.evs.iter().map(|e| e.max_discharge_kw).sum::<f64>();
        let import: f64 = self.hps.iter().map(|h| h.max_elec_kw).sum::<f64>()
            + self.bess.iter().map(|b| b.max_power_kw).sum::<f64>()
            + self.evs.iter().map(|e| e.max_charge_kw).sum::<f64>();
        (export, import)
    }
}

#[derive(Debug, Clone)]
pub struct DgHandles {
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
    pub cost: LinExpr,
}

#[derive(Debug, Clone)]
pub struct HpHandles {
    pub p: Vec<VarId>,
    /// Indoor temperature at the end of each step.
    pub temp: Vec<VarId>,
    pub cost: LinExpr,
}

#[derive(Debug, Clone)]
pub struct EvHandles {
    pub window: Range<usize>,
    /// Indexed by position inside the window.
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    /// State of charge at the end of each window step.
    pub soc: Vec<VarId>,
    pub cost: LinExpr,
}

#[derive(Debug, Clone)]
pub struct BessHandles {
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub q: Vec<VarId>,
    pub soc: Vec<VarId>,
    pub cost: LinExpr,
}

pub fn emit_dg(
    program: &mut LinearProgram,
    dg: &DistributedGenerator,
    capacity_factor: &[f64],
    horizon: &Horizon,
    tag: &str,
) -> Result<DgHandles> {
    let qmax = dg.reactive_limit();
    let mut p = Vec::with_capacity(horizon.steps);
    let mut q = Vec::with_capacity(horizon.steps);
    let mut cost = LinExpr::new();
    for (t, &cf) in capacity_factor.iter().enumerate().take(horizon.steps) {
        let pv =
            program.add_variable(0.0, dg.nominal_kw * cf, format!("{tag}dg_{}_p_{t}", dg.id))?;
        let qv = program.add_variable(-qmax, qmax, format!("{tag}dg_{}_q_{t}", dg.id))?;
        cost.add_term(pv, dg.marginal_cost * horizon.step_hours);
        p.push(pv);
        q.push(qv);
    }
    Ok(DgHandles { p, q, cost })
}

pub fn emit_hp(
    program: &mut LinearProgram,
    hp: &HeatPump,
    ambient: &[f64],
    horizon: &Horizon,
    tag: &str,
) -> Result<HpHandles> {
    let dt = horizon.step_hours;
    let leak = dt / (hp.capacitance * hp.resistance);
    let gain = dt / hp.capacitance * hp.cop;
    let last = horizon.steps - 1;
    let mut p = Vec::with_capacity(horizon.steps);
    let mut temp: Vec<VarId> = Vec::with_capacity(horizon.steps);
    for t in 0..horizon.steps {
        let pv = program.add_variable(0.0, hp.max_elec_kw, format!("{tag}hp_{}_p_{t}", hp.id))?;
        let (lo, hi) = if t == last {
            (hp.initial_temp, hp.initial_temp)
        } else {
            (hp.comfort_min, hp.comfort_max)
        };
        let tv = program.add_variable(lo, hi, format!("{tag}hp_{}_temp_{t}", hp.id))?;
        // T_{t+1} - (1 - leak) T_t - gain P_t = leak Tamb_t
        let mut terms = vec![(tv, 1.0), (pv, -gain)];
        let mut rhs = leak * ambient[t];
        match temp.last() {
            Some(&prev) => terms.push((prev, -(1.0 - leak))),
            None => rhs += (1.0 - leak) * hp.initial_temp,
        }
        program.add_constraint(terms, Sense::Eq, rhs, format!("{tag}hp_{}_dyn_{t}", hp.id))?;
        p.push(pv);
        temp.push(tv);
    }
    Ok(HpHandles {
        p,
        temp,
        cost: LinExpr::new(),
    })
}

#[allow(clippy::too_many_arguments)]
fn emit_storage_chain(
    program: &mut LinearProgram,
    id: &str,
    kind: &str,
    steps: Range<usize>,
    bounds: (&dyn Fn(usize) -> f64, &dyn Fn(usize) -> f64),
    capacity: f64,
    effs: (f64, f64),
    initial: f64,
    terminal: Option<f64>,
    dt: f64,
    tag: &str,
) -> Result<(Vec<VarId>, Vec<VarId>, Vec<VarId>)> {
    let (ch_max, dis_max) = bounds;
    let (eta_c, eta_d) = effs;
    let n = steps.len();
    let mut ch = Vec::with_capacity(n);
    let mut dis = Vec::with_capacity(n);
    let mut soc: Vec<VarId> = Vec::with_capacity(n);
    for (k, t) in steps.enumerate() {
        let c = program.add_variable(0.0, ch_max(t), format!("{tag}{kind}_{id}_ch_{t}"))?;
        let d = program.add_variable(0.0, dis_max(t), format!("{tag}{kind}_{id}_dis_{t}"))?;
        let (lo, hi) = match terminal {
            Some(v) if k + 1 == n => (v, v),
            _ => (0.0, capacity),
        };
        let s = program.add_variable(lo, hi, format!("{tag}{kind}_{id}_soc_{t}"))?;
        let mut terms = vec![(s, 1.0), (c, -eta_c * dt), (d, dt / eta_d)];
        let mut rhs = 0.0;
        match soc.last() {
            Some(&prev) => terms.push((prev, -1.0)),
            None => rhs = initial,
        }
        program.add_constraint(terms, Sense::Eq, rhs, format!("{tag}{kind}_{id}_soc_{t}"))?;
        ch.push(c);
        dis.push(d);
        soc.push(s);
    }
    Ok((ch, dis, soc))
}

pub fn emit_ev(
    program: &mut LinearProgram,
    ev: &EvChargingEvent,
    availability: &[f64],
    horizon: &Horizon,
    tag: &str,
) -> Result<EvHandles> {
    ev.validate(horizon)?;
    let dt = horizon.step_hours;
    let ch_max = |t: usize| ev.max_charge_kw * availability[t];
    let dis_max = |t: usize| ev.max_discharge_kw * availability[t];
    let (charge, discharge, soc) = emit_storage_chain(
        program,
        &ev.id,
        "ev",
        ev.window(),
        (&ch_max, &dis_max),
        ev.battery_kwh,
        (ev.charge_eff, ev.discharge_eff),
        ev.arrival_soc_kwh,
        None,
        dt,
        tag,
    )?;
    let mut terms = Vec::with_capacity(2 * charge.len());
    for (&c, &d) in charge.iter().zip(&discharge) {
        terms.push((c, dt));
        terms.push((d, -dt));
    }
    let required = ev.min_avg_charge_kw * ev.window().len() as f64 * dt;
    program.add_constraint(
        terms,
        Sense::Ge,
        required,
        format!("{tag}ev_{}_min_charge", ev.id),
    )?;
    let mut cost = LinExpr::new();
    if ev.discharge_cost != 0.0 {
        for &d in &discharge {
            cost.add_term(d, ev.discharge_cost * dt);
        }
    }
    Ok(EvHandles {
        window: ev.window(),
        charge,
        discharge,
        soc,
        cost,
    })
}

pub fn emit_bess(
    program: &mut LinearProgram,
    bess: &Bess,
    horizon: &Horizon,
    tag: &str,
) -> Result<BessHandles> {
    let dt = horizon.step_hours;
    let pmax = |_: usize| bess.max_power_kw;
    let (charge, discharge, soc) = emit_storage_chain(
        program,
        &bess.id,
        "bess",
        0..horizon.steps,
        (&pmax, &pmax),
        bess.energy_kwh,
        (bess.charge_eff, bess.discharge_eff),
        bess.initial_soc_kwh,
        Some(bess.initial_soc_kwh),
        dt,
        tag,
    )?;
    let qmax = bess.reactive_limit();
    let mut q = Vec::with_capacity(horizon.steps);
    let mut cost = LinExpr::new();
    for t in 0..horizon.steps {
        q.push(program.add_variable(-qmax, qmax, format!("{tag}bess_{}_q_{t}", bess.id))?);
        if bess.cycle_cost != 0.0 {
            cost.add_term(charge[t], bess.cycle_cost * dt);
            cost.add_term(discharge[t], bess.cycle_cost * dt);
        }
    }
    Ok(BessHandles {
        charge,
        discharge,
        q,
        soc,
        cost,
    })
}

/// All device handles of one scenario plus per-bus injection expressions.
#[derive(Debug, Clone)]
pub struct ParkHandles {
    pub dg: Vec<DgHandles>,
    pub hp: Vec<HpHandles>,
    pub ev: Vec<EvHandles>,
    pub bess: Vec<BessHandles>,
    /// Net active device injection in kW, `[bus][t]`, loads excluded.
    pub active: Vec<Vec<LinExpr>>,
    /// Net reactive device injection in kvar, `[bus][t]`.
    pub reactive: Vec<Vec<LinExpr>>,
}

impl ParkHandles {
    /// Total operating cost of the park as a linear expression.
    pub fn operating_cost(&self) -> LinExpr {
        let mut total = LinExpr::new();
        for c in self
            .dg
            .iter()
            .map(|h| &h.cost)
            .chain(self.hp.iter().map(|h| &h.cost))
            .chain(self.ev.iter().map(|h| &h.cost))
            .chain(self.bess.iter().map(|h| &h.cost))
        {
            total.add_expr(c, 1.0);
        }
        total.compact()
    }
}

pub fn emit_park(
    program: &mut LinearProgram,
    park: &DerPark,
    series: &Forecast,
    horizon: &Horizon,
    num_buses: usize,
    tag: &str,
) -> Result<ParkHandles> {
    let steps = horizon.steps;
    let mut active = vec![vec![LinExpr::new(); steps]; num_buses];
    let mut reactive = vec![vec![LinExpr::new(); steps]; num_buses];

    let mut dg = Vec::with_capacity(park.dgs.len());
    for (k, d) in park.dgs.iter().enumerate() {
        let h = emit_dg(program, d, &series.capacity_factor[k], horizon, tag)?;
        for t in 0..steps {
            active[d.bus][t].add_term(h.p[t], 1.0);
            reactive[d.bus][t].add_term(h.q[t], 1.0);
        }
        dg.push(h);
    }
    let mut hp = Vec::with_capacity(park.hps.len());
    for d in &park.hps {
        let h = emit_hp(program, d, &series.ambient_temp, horizon, tag)?;
        for t in 0..steps {
            active[d.bus][t].add_term(h.p[t], -1.0);
        }
        hp.push(h);
    }
    let mut ev = Vec::with_capacity(park.evs.len());
    for d in &park.evs {
        let h = emit_ev(program, d, &series.ev_availability, horizon, tag)?;
        for (k, t) in h.window.clone().enumerate() {
            active[d.bus][t].add_term(h.charge[k], -1.0);
            active[d.bus][t].add_term(h.discharge[k], 1.0);
        }
        ev.push(h);
    }
    let mut bess = Vec::with_capacity(park.bess.len());
    for d in &park.bess {
        let h = emit_bess(program, d, horizon, tag)?;
        for t in 0..steps {
            active[d.bus][t].add_term(h.charge[t], -1.0);
            active[d.bus][t].add_term(h.discharge[t], 1.0);
            reactive[d.bus][t].add_term(h.q[t], 1.0);
        }
        bess.push(h);
    }
    Ok(ParkHandles {
        dg,
        hp,
        ev,
        bess,
        active,
        reactive,
    })
}
