//! The JSON run configuration.
//!
//! File paths are resolved against the directory holding the configuration.
//! Example:
//!
//! ```json
//! {
//!   "name": "desk",
//!   "horizon": { "steps": 96, "step_hours": 0.25, "rcm_window_hours": 4.0, "start_hour": 0.0 },
//!   "network": { "buses": "buses.csv", "branches": "branches.csv", "base_mva": 1.0, "base_kv": 0.4 },
//!   "devices": { "pv": "pv.csv", "heat_pumps": "heat_pumps.csv", "ev_events": "ev_events.csv", "batteries": "batteries.csv" },
//!   "forecast": "forecast.csv",
//!   "market": { "prequalified_kw": 50.0, "tariff_hourly": [206.5, "... 24 values"] },
//!   "scenarios": { "count": 1000, "seed": 42, "directory": "scenarios" },
//!   "risk": { "measure": "cvar", "alpha": 0.9 },
//!   "solver": { "method": "benders", "benders": { "tolerance": 1e-6, "max_iterations": 200, "workers": 4 } },
//!   "sweep": { "levels": [0.0, 0.5, 1.0] },
//!   "output": "out"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benders::BendersOptions;
use crate::error::{Result, VppError};
use crate::experiments::{ClockWindow, SolveMethod, SweepConfig};
use crate::grid::{RadialNetwork, DEFAULT_POLYGON_SIDES};
use crate::horizon::Horizon;
use crate::io::{self, DeviceFiles};
use crate::market::MarketConfig;
use crate::model::VppModel;
use crate::scenario::ErrorTable;
use crate::stochastic::RiskMeasure;
use crate::synthetic::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSettings {
    /// Bus table: `id, v_min, v_max, is_root, peak_load_kw, peak_load_kvar`
    /// with squared-voltage limits in p.u.².
    pub buses: PathBuf,
    /// Branch table: `from, to, r, x, s_max_kva` with r and x in p.u. on
    /// the feeder base.
    pub branches: PathBuf,
    pub base_mva: f64,
    pub base_kv: f64,
    #[serde(default = "default_polygon_sides")]
    pub polygon_sides: usize,
}

fn default_polygon_sides() -> usize {
    DEFAULT_POLYGON_SIDES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSettings {
    pub prequalified_kw: f64,
    /// Network tariff per clock hour, currency/MWh, 24 values.
    pub tariff_hourly: Vec<f64>,
    #[serde(default)]
    pub dam_bid_cap_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSettings {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_scenario_dir")]
    pub directory: PathBuf,
    /// Forecast error table; the built-in default when absent.
    #[serde(default)]
    pub errors: Option<ErrorTable>,
}

fn default_scenario_dir() -> PathBuf {
    PathBuf::from("scenarios")
}

impl ScenarioSettings {
    pub fn error_table(&self) -> ErrorTable {
        self.errors.clone().unwrap_or_else(ErrorTable::standard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Extensive,
    Benders,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub method: MethodName,
    /// Largest extensive form, in rows, the solver will attempt.
    pub extensive_max_rows: Option<usize>,
    pub benders: BendersOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            method: MethodName::Extensive,
            extensive_max_rows: Some(400_000),
            benders: BendersOptions::default(),
        }
    }
}

impl SolverSettings {
    pub fn solve_method(&self, method: MethodName) -> SolveMethod {
        match method {
            MethodName::Extensive => SolveMethod::Extensive {
                max_rows: self.extensive_max_rows,
            },
            MethodName::Benders => SolveMethod::Benders(self.benders),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub levels: Vec<f64>,
    pub low_window: ClockWindow,
    pub high_window: ClockWindow,
    pub parallel: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        let d = SweepConfig::default();
        SweepSettings {
            levels: d.levels,
            low_window: d.low_window,
            high_window: d.high_window,
            parallel: d.parallel,
        }
    }
}

impl SweepSettings {
    pub fn to_config(&self, method: SolveMethod) -> SweepConfig {
        SweepConfig {
            levels: self.levels.clone(),
            low_window: self.low_window,
            high_window: self.high_window,
            method,
            parallel: self.parallel,
        }
    }
}

fn default_name() -> String {
    "vpp".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_risk() -> RiskMeasure {
    RiskMeasure::Expectation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub horizon: Horizon,
    pub network: NetworkSettings,
    #[serde(default)]
    pub devices: DeviceFiles,
    /// Point forecast in the series CSV schema of [`crate::io`].
    pub forecast: PathBuf,
    pub market: MarketSettings,
    pub scenarios: ScenarioSettings,
    #[serde(default = "default_risk")]
    pub risk: RiskMeasure,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

/// A configuration together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.horizon.validate()?;
        self.risk.validate()?;
        if self.scenarios.count == 0 {
            return Err(VppError::Config("scenario count must be at least 1".into()));
        }
        if self.market.tariff_hourly.len() != 24 {
            return Err(VppError::Length {
                what: "tariff_hourly",
                expected: 24,
                got: self.market.tariff_hourly.len(),
            });
        }
        if let Some(bad) = self.sweep.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(VppError::Config(format!(
                "sweep level {bad} outside [0, 1]"
            )));
        }
        let b = &self.solver.benders;
        if !(b.tolerance > 0.0) || b.max_iterations == 0 || b.workers == 0 {
            return Err(VppError::Config(
                "Benders needs a positive tolerance, iteration limit and worker count".into(),
            ));
        }
        if let Some(t) = &self.scenarios.errors {
            t.validate()?;
        }
        Ok(())
    }

    /// Every input file named by the configuration.
    pub fn input_files(&self) -> Vec<&Path> {
        let d = &self.devices;
        let mut v = vec![
            self.network.buses.as_path(),
            self.network.branches.as_path(),
            self.forecast.as_path(),
        ];
        v.extend(
            [&d.pv, &d.heat_pumps, &d.ev_events, &d.batteries]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path),
        );
        v
    }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: RunConfig = io::read_json(path)?;
        config.validate()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for f in config.input_files() {
            let p = base_dir.join(f);
            if !p.is_file() {
                return Err(VppError::Config(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn scenario_dir(&self) -> PathBuf {
        self.resolve(&self.config.scenarios.directory)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output)
    }

    pub fn instance(&self) -> Result<Instance> {
        let c = &self.config;
        let network = RadialNetwork {
            buses: io::read_buses(&self.resolve(&c.network.buses))?,
            branches: io::read_branches(&self.resolve(&c.network.branches))?,
            base_mva: c.network.base_mva,
            base_kv: c.network.base_kv,
        };
        let park = io::read_park(&self.base_dir, &c.devices)?;
        let market = MarketConfig {
            prequalified_kw: c.market.prequalified_kw,
            tariff: c.horizon.expand_hourly(&c.market.tariff_hourly)?,
            dam_bid_cap_kw: c.market.dam_bid_cap_kw,
        };
        let model = VppModel::new(
            c.horizon.clone(),
            network,
            park,
            market,
            c.network.polygon_sides,
        )?;
        let forecast = io::read_forecast(&self.resolve(&c.forecast), &model)?;
        Ok(Instance { model, forecast })
    }
}

/// Recovers 24 hourly values from a per-step schedule. Hours the horizon
/// does not cover take the first step's value.
pub fn hourly_from_steps(horizon: &Horizon, per_step: &[f64]) -> Result<Vec<f64>> {
    let fill = per_step.first().copied().unwrap_or(0.0);
    let mut hourly: Vec<Option<f64>> = vec![None; 24];
    for (t, &v) in per_step.iter().enumerate() {
        let h = (horizon.clock_hour(t).floor() as usize).min(23);
        match hourly[h] {
            Some(prev) if prev != v => {
                return Err(VppError::Config(format!(
                    "tariff varies within clock hour {h}; it must be hourly"
                )));
            }
            _ => hourly[h] = Some(v),
        }
    }
    Ok(hourly.into_iter().map(|v| v.unwrap_or(fill)).collect())
}

/// Writes an instance as CSV tables plus `config.json` into `dir` and
/// returns the configuration path.
pub fn write_instance(
    dir: &Path,
    instance: &Instance,
    scenarios: ScenarioSettings,
    risk: RiskMeasure,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| VppError::io(dir, e))?;
    let m = &instance.model;
    let p = &m.park;
    let pick = |present: bool, name: &str| present.then(|| PathBuf::from(name));
    let devices = DeviceFiles {
        pv: pick(!p.dgs.is_empty(), "pv.csv"),
        heat_pumps: pick(!p.hps.is_empty(), "heat_pumps.csv"),
        ev_events: pick(!p.evs.is_empty(), "ev_events.csv"),
        batteries: pick(!p.bess.is_empty(), "batteries.csv"),
    };
    let config = RunConfig {
        name: dir
            .file_name()
            .map_or_else(default_name, |n| n.to_string_lossy().into_owned()),
        horizon: m.horizon.clone(),
        network: NetworkSettings {
            buses: "buses.csv".into(),
            branches: "branches.csv".into(),
            base_mva: m.network.base_mva,
            base_kv: m.network.base_kv,
            polygon_sides: m.polygon_sides,
        },
        devices,
        forecast: "forecast.csv".into(),
        market: MarketSettings {
            prequalified_kw: m.market.prequalified_kw,
            tariff_hourly: hourly_from_steps(&m.horizon, &m.market.tariff)?,
            dam_bid_cap_kw: m.market.dam_bid_cap_kw,
        },
        scenarios,
        risk,
        solver: SolverSettings::default(),
        sweep: SweepSettings::default(),
        output: default_output(),
    };
    config.validate()?;
    io::write_buses(&dir.join("buses.csv"), &m.network.buses)?;
    io::write_branches(&dir.join("branches.csv"), &m.network.branches)?;
    io::write_park(dir, &config.devices, p)?;
    io::write_forecast(&dir.join("forecast.csv"), m, &instance.forecast)?;
    let path = dir.join("config.json");
    io::write_json(&path, &config)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::desk_instance;

    #[test]
    fn hourly_round_trip() {
        let h = Horizon::new(8, 0.5, 4.0, 10.0).unwrap();
        let steps = vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        let hourly = hourly_from_steps(&h, &steps).unwrap();
        assert_eq!(h.expand_hourly(&hourly).unwrap(), steps);
        assert!(hourly_from_steps(&h, &[1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]).is_err());
    }

    #[test]
    fn written_instance_loads_back_identically() {
        let dir = tempfile::tempdir().unwrap();
        let inst = desk_instance(3).unwrap();
        let settings = ScenarioSettings {
            count: 4,
            seed: 9,
            directory: "scenarios".into(),
            errors: None,
        };
        let path = write_instance(dir.path(), &inst, settings, RiskMeasure::Expectation).unwrap();
        let loaded = LoadedConfig::load(&path).unwrap().instance().unwrap();
        assert_eq!(loaded.forecast, inst.forecast);
        assert_eq!(loaded.model.park, inst.model.park);
        assert_eq!(loaded.model.network, inst.model.network);
        assert_eq!(loaded.model.market, inst.model.market);
        assert_eq!(
            io::model_hash(&loaded.model, &loaded.forecast).unwrap(),
            io::model_hash(&inst.model, &inst.forecast).unwrap()
        );
    }

    #[test]
    fn rejects_bad_alpha_and_levels() {
        let dir = tempfile::tempdir().unwrap();
        let inst = desk_instance(3).unwrap();
        let settings = ScenarioSettings {
            count: 4,
            seed: 9,
            directory: "scenarios".into(),
            errors: None,
        };
        let path = write_instance(dir.path(), &inst, settings, RiskMeasure::Expectation).unwrap();
        let mut cfg: RunConfig = io::read_json(&path).unwrap();
        cfg.risk = RiskMeasure::Cvar { alpha: 1.0 };
        assert!(cfg.validate().is_err());
        cfg.risk = RiskMeasure::Expectation;
        cfg.sweep.levels = vec![0.0, 1.5];
        assert!(cfg.validate().is_err());
    }
}
