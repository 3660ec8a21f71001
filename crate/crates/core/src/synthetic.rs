//! Small built-in instances with smooth daily profiles.
//!
//! Prices, PV capacity factors, load shapes and ambient temperature follow
//! fixed daily curves plus a little seeded noise, so every instance is
//! reproducible from its seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::der::{Bess, DerPark, DistributedGenerator, EvChargingEvent, HeatPump};
use crate::error::Result;
use crate::grid::{
    synthetic_feeder, Branch, Bus, RadialNetwork, DEFAULT_POLYGON_SIDES, V_SQ_MAX, V_SQ_MIN,
};
use crate::horizon::Horizon;
use crate::market::MarketConfig;
use crate::model::VppModel;
use crate::scenario::Forecast;

/// Distribution tariff used by the built-in instances, currency/MWh.
pub const DEFAULT_TARIFF: f64 = 206.5;

/// A model together with the point forecast scenarios are sampled around.
#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub model: VppModel,
    pub forecast: Forecast,
}

/// Shape parameters of the daily curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyShape {
    /// Mean day-ahead price, currency/MWh.
    pub price_level: f64,
    pub evening_price_peak: f64,
    pub midday_price_dip: f64,
    /// Reserve capacity prices per window, currency/MW.
    pub rcm_up: f64,
    pub rcm_dn: f64,
    /// Load as a fraction of peak at night, and the size of the evening hump.
    pub base_load: f64,
    pub evening_load: f64,
    pub mean_ambient: f64,
    pub ev_availability: f64,
    /// Relative amplitude of the seeded noise on prices and loads.
    pub noise: f64,
}

impl Default for DailyShape {
    fn default() -> Self {
        DailyShape {
            price_level: 95.0,
            evening_price_peak: 70.0,
            midday_price_dip: 30.0,
            rcm_up: 40.0,
            rcm_dn: 25.0,
            base_load: 0.35,
            evening_load: 0.65,
            mean_ambient: 4.0,
            ev_availability: 0.9,
            noise: 0.03,
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let d = (hour - centre + 12.0).rem_euclid(24.0) - 12.0;
    (-0.5 * (d / width).powi(2)).exp()
}

pub fn pv_capacity_factor(hour: f64) -> f64 {
    if (6.0..18.0).contains(&hour) {
        0.9 * (PI * (hour - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Builds the point forecast for a park on a network.
pub fn daily_forecast(
    horizon: &Horizon,
    network: &RadialNetwork,
    park: &DerPark,
    shape: &DailyShape,
    seed: u64,
) -> Forecast {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |scale: f64| 1.0 + shape.noise * scale * (2.0 * rng.random::<f64>() - 1.0);
    let hours: Vec<f64> = (0..horizon.steps)
        .map(|t| horizon.clock_hour(t) + 0.5 * horizon.step_hours)
        .collect();

    let day_ahead: Vec<f64> = hours
        .iter()
        .map(|&h| {
            let p = shape.price_level
                + shape.evening_price_peak * bump(h, 19.0, 2.0)
                + 20.0 * bump(h, 8.0, 1.5)
                - shape.midday_price_dip * bump(h, 13.0, 2.5);
            p * jitter(1.0)
        })
        .collect();
    let ram_up = day_ahead.iter().map(|p| p + 25.0).collect();
    let ram_dn = day_ahead.iter().map(|p| 0.3 * p).collect();
    let mfrr_up = day_ahead.iter().map(|p| p + 45.0).collect();
    let mfrr_dn = day_ahead.iter().map(|p| p - 45.0).collect();
    let windows = horizon.num_windows();
    let rcm_up = (0..windows).map(|_| shape.rcm_up * jitter(1.0)).collect();
    let rcm_dn = (0..windows).map(|_| shape.rcm_dn * jitter(1.0)).collect();

    let cf: Vec<f64> = hours.iter().map(|&h| pv_capacity_factor(h)).collect();
    let capacity_factor = park
        .dgs
        .iter()
        .map(|_| cf.iter().map(|c| (c * jitter(0.5)).min(1.0)).collect())
        .collect();
    let profile: Vec<f64> = hours
        .iter()
        .map(|&h| {
            shape.base_load + 0.2 * bump(h, 8.0, 1.5) + shape.evening_load * bump(h, 19.0, 2.0)
        })
        .collect();
    let mut load_p = Vec::with_capacity(network.buses.len());
    let mut load_q = Vec::with_capacity(network.buses.len());
    for b in &network.buses {
        let scale: Vec<f64> = profile.iter().map(|v| v * jitter(1.0)).collect();
        load_p.push(scale.iter().map(|s| s * b.peak_load_kw).collect());
        load_q.push(scale.iter().map(|s| s * b.peak_load_kvar).collect());
    }
    let ambient_temp = hours
        .iter()
        .map(|&h| shape.mean_ambient + 3.0 * bump(h, 15.0, 4.0) - 1.5)
        .collect();
    let ev_availability = vec![shape.ev_availability; horizon.steps];
    Forecast {
        day_ahead,
        rcm_up,
        rcm_dn,
        ram_up,
        ram_dn,
        mfrr_up,
        mfrr_dn,
        capacity_factor,
        ambient_temp,
        load_p,
        load_q,
        ev_availability,
    }
}

fn bus(id: usize, peak_kw: f64) -> Bus {
    Bus {
        id,
        v_min: V_SQ_MIN,
        v_max: V_SQ_MAX,
        is_root: id == 0,
        peak_load_kw: peak_kw,
        peak_load_kvar: 0.3 * peak_kw,
    }
}

fn pv(id: &str, bus: usize, kw: f64) -> DistributedGenerator {
    DistributedGenerator {
        id: id.into(),
        bus,
        nominal_kw: kw,
        inverter_kva: 1.1 * kw,
        marginal_cost: 0.0,
    }
}

fn heat_pump(id: &str, bus: usize, kw: f64) -> HeatPump {
    // Sized so that holding 21 °C at 4 °C outside uses about a third of
    // the rated electric power.
    HeatPump {
        id: id.into(),
        bus,
        max_elec_kw: kw,
        cop: 3.0,
        resistance: 17.0 / kw,
        capacitance: 6.0 * kw,
        comfort_min: 19.5,
        comfort_max: 23.0,
        initial_temp: 21.0,
    }
}

fn battery(id: &str, bus: usize, kwh: f64, kw: f64) -> Bess {
    Bess {
        id: id.into(),
        bus,
        energy_kwh: kwh,
        max_power_kw: kw,
        inverter_kva: 1.1 * kw,
        charge_eff: 0.95,
        discharge_eff: 0.95,
        initial_soc_kwh: 0.5 * kwh,
        cycle_cost: 0.005,
    }
}

fn ev(
    id: &str,
    bus: usize,
    arrival: usize,
    departure: usize,
    kwh: f64,
    kw: f64,
) -> EvChargingEvent {
    EvChargingEvent {
        id: id.into(),
        bus,
        arrival,
        departure,
        battery_kwh: kwh,
        arrival_soc_kwh: 0.4 * kwh,
        max_charge_kw: kw,
        max_discharge_kw: kw,
        charge_eff: 0.93,
        discharge_eff: 0.93,
        min_avg_charge_kw: 0.3 * kw,
        discharge_cost: 0.02,
    }
}

fn line(from: usize, to: usize, r: f64, x: f64, s_max_kva: f64) -> Branch {
    Branch {
        from,
        to,
        r,
        x,
        s_max_kva,
    }
}

/// Five-bus feeder, eight hourly steps from 10:00, two 4 h reserve windows.
pub fn desk_instance(seed: u64) -> Result<Instance> {
    let horizon = Horizon::new(8, 1.0, 4.0, 10.0)?;
    let network = RadialNetwork {
        buses: vec![
            bus(0, 0.0),
            bus(1, 30.0),
            bus(2, 20.0),
            bus(3, 25.0),
            bus(4, 20.0),
        ],
        branches: vec![
            line(0, 1, 0.01, 0.006, 250.0),
            line(1, 2, 0.015, 0.008, 150.0),
            line(1, 3, 0.015, 0.008, 150.0),
            line(3, 4, 0.02, 0.01, 120.0),
        ],
        base_mva: 1.0,
        base_kv: 0.4,
    };
    let park = DerPark {
        dgs: vec![pv("pv2", 2, 60.0), pv("pv4", 4, 25.0)],
        hps: vec![heat_pump("hp3", 3, 12.0)],
        evs: vec![ev("ev4", 4, 1, 7, 60.0, 11.0)],
        bess: vec![battery("bess1", 1, 40.0, 20.0)],
    };
    let market = MarketConfig {
        prequalified_kw: 25.0,
        tariff: vec![DEFAULT_TARIFF; horizon.steps],
        dam_bid_cap_kw: None,
    };
    let forecast = daily_forecast(&horizon, &network, &park, &DailyShape::default(), seed);
    let model = VppModel::new(horizon, network, park, market, DEFAULT_POLYGON_SIDES)?;
    Ok(Instance { model, forecast })
}

/// Full-day instance for tariff sweeps: PV surplus around midday and an
/// evening load peak larger than the park can shift.
pub fn sweep_instance(seed: u64) -> Result<Instance> {
    let horizon = Horizon::new(24, 1.0, 4.0, 0.0)?;
    let network = RadialNetwork {
        buses: vec![
            bus(0, 0.0),
            bus(1, 25.0),
            bus(2, 30.0),
            bus(3, 30.0),
            bus(4, 25.0),
            bus(5, 20.0),
        ],
        branches: vec![
            line(0, 1, 0.01, 0.006, 300.0),
            line(1, 2, 0.012, 0.007, 200.0),
            line(2, 3, 0.015, 0.008, 150.0),
            line(1, 4, 0.015, 0.008, 150.0),
            line(4, 5, 0.02, 0.01, 120.0),
        ],
        base_mva: 1.0,
        base_kv: 0.4,
    };
    let park = DerPark {
        dgs: vec![pv("pv2", 2, 50.0), pv("pv3", 3, 40.0), pv("pv5", 5, 30.0)],
        hps: vec![heat_pump("hp1", 1, 10.0), heat_pump("hp4", 4, 8.0)],
        evs: vec![
            ev("ev3", 3, 9, 20, 60.0, 11.0),
            ev("ev5", 5, 8, 22, 50.0, 7.0),
        ],
        bess: vec![battery("bess2", 2, 30.0, 15.0)],
    };
    let market = MarketConfig {
        prequalified_kw: 20.0,
        tariff: vec![DEFAULT_TARIFF; horizon.steps],
        dam_bid_cap_kw: None,
    };
    let shape = DailyShape {
        evening_load: 0.9,
        ..DailyShape::default()
    };
    let forecast = daily_forecast(&horizon, &network, &park, &shape, seed);
    let model = VppModel::new(horizon, network, park, market, DEFAULT_POLYGON_SIDES)?;
    Ok(Instance { model, forecast })
}

/// Residential district on a random radial feeder of `buses` buses
/// (97 at full size): 150 kW peak non-dispatchable load, 150 kWp PV, 85 kW
/// of heat pumps, a 75 kWh battery and 40 EV charging events averaging
/// 70 kWh and 7 kW, over one day of `steps` steps.
pub fn district_instance(buses: usize, steps: usize, seed: u64) -> Result<Instance> {
    if buses < 2 {
        return Err(crate::error::VppError::Network(
            "a district needs at least two buses".into(),
        ));
    }
    let horizon = Horizon::new(steps, 24.0 / steps as f64, 4.0, 0.0)?;
    let mut network = synthetic_feeder(buses, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let load_buses: Vec<usize> = (1..buses).collect();
    let weights: Vec<f64> = load_buses
        .iter()
        .map(|_| rng.random_range(0.5..1.5))
        .collect();
    let wsum: f64 = weights.iter().sum();
    for (&b, w) in load_buses.iter().zip(&weights) {
        network.buses[b].peak_load_kw = 150.0 * w / wsum;
        network.buses[b].peak_load_kvar = 0.3 * network.buses[b].peak_load_kw;
    }
    let pick = |rng: &mut ChaCha8Rng| rng.random_range(1..buses);
    let dgs = (0..10)
        .map(|k| pv(&format!("pv{k}"), pick(&mut rng), 15.0))
        .collect();
    let hps = (0..10)
        .map(|k| heat_pump(&format!("hp{k}"), pick(&mut rng), 8.5))
        .collect();
    let bess = vec![battery("bess0", pick(&mut rng), 75.0, 35.0)];
    let per_hour = steps as f64 / 24.0;
    let evs = (0..40)
        .map(|k| {
            let kwh = rng.random_range(50.0..90.0);
            let kw = rng.random_range(5.0..9.0);
            let arrive_h = rng.random_range(7.0..17.0);
            let stay_h = rng.random_range(3.0..7.0);
            let arrival = ((arrive_h * per_hour) as usize).min(steps - 1);
            let departure = (((arrive_h + stay_h) * per_hour) as usize).clamp(arrival + 1, steps);
            ev(
                &format!("ev{k}"),
                pick(&mut rng),
                arrival,
                departure,
                kwh,
                kw,
            )
        })
        .collect();
    let park = DerPark {
        dgs,
        hps,
        evs,
        bess,
    };
    let market = MarketConfig {
        prequalified_kw: 50.0,
        tariff: vec![DEFAULT_TARIFF; horizon.steps],
        dam_bid_cap_kw: None,
    };
    let forecast = daily_forecast(&horizon, &network, &park, &DailyShape::default(), seed);
    let model = VppModel::new(horizon, network, park, market, DEFAULT_POLYGON_SIDES)?;
    Ok(Instance { model, forecast })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioSet;
    use crate::stochastic::{solve_extensive, RiskMeasure};

    #[test]
    fn desk_forecast_is_consistent() {
        let inst = desk_instance(1).unwrap();
        let m = &inst.model;
        inst.forecast
            .validate(&m.horizon, m.park.dgs.len(), m.num_buses())
            .unwrap();
        assert_eq!(inst.forecast.rcm_up.len(), 2);
    }

    #[test]
    fn desk_base_forecast_solves() {
        let inst = desk_instance(1).unwrap();
        let set = ScenarioSet::deterministic(&inst.forecast);
        let sol = solve_extensive(&inst.model, &set, RiskMeasure::Expectation, None).unwrap();
        assert!(sol.objective.is_finite());
    }

    #[test]
    fn district_matches_headline_sizes() {
        let inst = district_instance(97, 24, 3).unwrap();
        let m = &inst.model;
        assert_eq!(m.num_buses(), 97);
        let load: f64 = m.network.buses.iter().map(|b| b.peak_load_kw).sum();
        assert!((load - 150.0).abs() < 1e-9);
        let pv: f64 = m.park.dgs.iter().map(|d| d.nominal_kw).sum();
        assert!((pv - 150.0).abs() < 1e-9);
        let hp: f64 = m.park.hps.iter().map(|h| h.max_elec_kw).sum();
        assert!((hp - 85.0).abs() < 1e-9);
        assert_eq!(m.park.evs.len(), 40);
    }
}
