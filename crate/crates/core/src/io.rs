//! On-disk formats: scenario directories, solution dumps, reports and the
//! network and device tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit for bit. All files are UTF-8 CSV with a header row,
//! plus small JSON documents for manifests and summaries.
//!
//! Series files (forecasts and scenarios) hold one row per step:
//!
//! | column | unit |
//! |---|---|
//! | `step`, `hour` | index, clock hour at step start |
//! | `day_ahead`, `ram_up`, `ram_dn`, `mfrr_up`, `mfrr_dn` | currency/MWh |
//! | `rcm_up`, `rcm_dn` | currency/MW for the step's reserve window, repeated on each step of the window |
//! | `ambient_temp` | °C |
//! | `ev_availability` | fraction of rated EV power |
//! | `cf_<dg id>` | PV capacity factor |
//! | `load_p_<bus>`, `load_q_<bus>` | kW, kvar |
//! | `imbalance_short`, `imbalance_long` | currency/MWh, scenario files only |

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benders::ConvergenceReport;
use crate::der::{Bess, DerPark, DistributedGenerator, EvChargingEvent, HeatPump};
use crate::error::{Result, VppError};
use crate::experiments::{ProfitReport, SweepRow};
use crate::grid::{Branch, Bus};
use crate::horizon::Horizon;
use crate::market::{CostBreakdown, FirstStageDecision};
use crate::model::{DispatchSeries, VppModel};
use crate::scenario::{ErrorTable, Forecast, Scenario, ScenarioSet};
use crate::stochastic::StochasticSolution;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest identifying a model and its base forecast.
pub fn model_hash(model: &VppModel, forecast: &Forecast) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(&(model, forecast))?))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| VppError::io(dir, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| VppError::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| VppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

fn fmt_f64(v: f64) -> String {
    // Debug gives the shortest round-trip digits and switches to exponent
    // form for very large or small magnitudes.
    format!("{v:?}")
}

/// Column-oriented table written with a header row.
#[derive(Debug, Default)]
struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(values);
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let rows = self.columns.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.names)?;
        for r in 0..rows {
            w.write_record(self.columns.iter().map(|c| fmt_f64(c[r])))?;
        }
        w.into_inner()
            .map_err(|e| VppError::Config(format!("csv buffer: {e}")))
    }
}

/// A CSV file parsed into named float columns.
struct ReadTable {
    path: PathBuf,
    index: HashMap<String, usize>,
    rows: Vec<Vec<f64>>,
}

impl ReadTable {
    fn parse(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let index = r
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_owned(), i))
            .collect();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        VppError::Scenario(format!(
                            "{}: row {}: `{f}` is not a number",
                            path.display(),
                            line + 2
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(ReadTable {
            path: path.to_owned(),
            index,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = *self.index.get(name).ok_or_else(|| {
            VppError::Scenario(format!("{}: missing column `{name}`", self.path.display()))
        })?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

fn per_window_to_steps(horizon: &Horizon, values: &[f64]) -> Vec<f64> {
    (0..horizon.steps)
        .map(|t| values[horizon.window_of(t)])
        .collect()
}

fn steps_to_per_window(horizon: &Horizon, values: &[f64], what: &str) -> Result<Vec<f64>> {
    (0..horizon.num_windows())
        .map(|w| {
            let steps = horizon.window_steps(w);
            let v = values[steps.start];
            if values[steps].iter().any(|x| x.to_bits() != v.to_bits()) {
                return Err(VppError::Scenario(format!(
                    "{what} must be constant within reserve window {w}"
                )));
            }
            Ok(v)
        })
        .collect()
}

fn series_table(model: &VppModel, f: &Forecast, imbalance: Option<(&[f64], &[f64])>) -> Table {
    let h = &model.horizon;
    let mut t = Table::default();
    t.push("step", (0..h.steps).map(|s| s as f64).collect());
    t.push("hour", (0..h.steps).map(|s| h.clock_hour(s)).collect());
    t.push("day_ahead", f.day_ahead.clone());
    t.push("rcm_up", per_window_to_steps(h, &f.rcm_up));
    t.push("rcm_dn", per_window_to_steps(h, &f.rcm_dn));
    t.push("ram_up", f.ram_up.clone());
    t.push("ram_dn", f.ram_dn.clone());
    t.push("mfrr_up", f.mfrr_up.clone());
    t.push("mfrr_dn", f.mfrr_dn.clone());
    if let Some((short, long)) = imbalance {
        t.push("imbalance_short", short.to_vec());
        t.push("imbalance_long", long.to_vec());
    }
    t.push("ambient_temp", f.ambient_temp.clone());
    t.push("ev_availability", f.ev_availability.clone());
    for (dg, cf) in model.park.dgs.iter().zip(&f.capacity_factor) {
        t.push(format!("cf_{}", dg.id), cf.clone());
    }
    for (b, (p, q)) in f.load_p.iter().zip(&f.load_q).enumerate() {
        t.push(format!("load_p_{b}"), p.clone());
        t.push(format!("load_q_{b}"), q.clone());
    }
    t
}

type Imbalance = (Vec<f64>, Vec<f64>);

fn parse_series(
    model: &VppModel,
    path: &Path,
    bytes: &[u8],
) -> Result<(Forecast, Option<Imbalance>)> {
    let t = ReadTable::parse(path, bytes)?;
    let h = &model.horizon;
    if t.rows.len() != h.steps {
        return Err(VppError::Length {
            what: "series rows",
            expected: h.steps,
            got: t.rows.len(),
        });
    }
    let imbalance = if t.has("imbalance_short") {
        Some((t.column("imbalance_short")?, t.column("imbalance_long")?))
    } else {
        None
    };
    let forecast = Forecast {
        day_ahead: t.column("day_ahead")?,
        rcm_up: steps_to_per_window(h, &t.column("rcm_up")?, "rcm_up")?,
        rcm_dn: steps_to_per_window(h, &t.column("rcm_dn")?, "rcm_dn")?,
        ram_up: t.column("ram_up")?,
        ram_dn: t.column("ram_dn")?,
        mfrr_up: t.column("mfrr_up")?,
        mfrr_dn: t.column("mfrr_dn")?,
        capacity_factor: model
            .park
            .dgs
            .iter()
            .map(|d| t.column(&format!("cf_{}", d.id)))
            .collect::<Result<_>>()?,
        ambient_temp: t.column("ambient_temp")?,
        load_p: (0..model.num_buses())
            .map(|b| t.column(&format!("load_p_{b}")))
            .collect::<Result<_>>()?,
        load_q: (0..model.num_buses())
            .map(|b| t.column(&format!("load_q_{b}")))
            .collect::<Result<_>>()?,
        ev_availability: t.column("ev_availability")?,
    };
    forecast.validate(h, model.park.dgs.len(), model.num_buses())?;
    Ok((forecast, imbalance))
}

pub fn write_forecast(path: &Path, model: &VppModel, forecast: &Forecast) -> Result<()> {
    write_bytes(path, &series_table(model, forecast, None).to_csv()?)
}

pub fn read_forecast(path: &Path, model: &VppModel) -> Result<Forecast> {
    Ok(parse_series(model, path, &read_bytes(path)?)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub format_version: u32,
    pub seed: u64,
    pub count: usize,
    pub errors: ErrorTable,
    /// Digest of the model and base forecast the scenarios were drawn for.
    pub model_hash: String,
    pub probabilities: Vec<f64>,
    /// Error draws per scenario, in error-kind order.
    pub draws: Vec<Vec<f64>>,
    pub files: Vec<FileDigest>,
}

pub fn scenario_file_name(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(4);
    format!("scenario_{index:0width$}.csv")
}

/// Writes one CSV per scenario plus `manifest.json`; returns the digest of
/// the manifest, which identifies the set.
pub fn write_scenarios(
    dir: &Path,
    model: &VppModel,
    set: &ScenarioSet,
    errors: &ErrorTable,
    model_hash: &str,
) -> Result<String> {
    create_dir(dir)?;
    let mut files = Vec::with_capacity(set.len());
    for (s, sc) in set.scenarios.iter().enumerate() {
        let name = scenario_file_name(s, set.len());
        let bytes = series_table(
            model,
            &sc.series,
            Some((&sc.imbalance_short, &sc.imbalance_long)),
        )
        .to_csv()?;
        write_bytes(&dir.join(&name), &bytes)?;
        files.push(FileDigest {
            sha256: sha256_hex(&bytes),
            name,
        });
    }
    let manifest = ScenarioManifest {
        format_version: FORMAT_VERSION,
        seed: set.seed,
        count: set.len(),
        errors: errors.clone(),
        model_hash: model_hash.to_owned(),
        probabilities: set.probabilities(),
        draws: set.scenarios.iter().map(|s| s.draws.clone()).collect(),
        files,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    manifest_digest(dir)
}

/// Digest of a scenario directory's manifest file.
pub fn manifest_digest(dir: &Path) -> Result<String> {
    Ok(sha256_hex(&read_bytes(&dir.join(MANIFEST_FILE))?))
}

fn check_hash(what: impl Into<String>, expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(VppError::HashMismatch {
            what: what.into(),
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(())
}

/// Loads a scenario directory, verifying file digests and, when given,
/// that it was generated for `expected_model_hash`.
pub fn read_scenarios(
    dir: &Path,
    model: &VppModel,
    expected_model_hash: Option<&str>,
) -> Result<(ScenarioSet, ScenarioManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(VppError::Scenario(format!(
            "no scenario manifest at {}",
            manifest_path.display()
        )));
    }
    let manifest: ScenarioManifest = read_json(&manifest_path)?;
    if let Some(h) = expected_model_hash {
        check_hash("scenario set model", h, &manifest.model_hash)?;
    }
    if manifest.files.len() != manifest.count
        || manifest.probabilities.len() != manifest.count
        || manifest.draws.len() != manifest.count
    {
        return Err(VppError::Scenario(
            "manifest entries disagree with the scenario count".into(),
        ));
    }
    let mut scenarios = Vec::with_capacity(manifest.count);
    for (f, (&p, draws)) in manifest
        .files
        .iter()
        .zip(manifest.probabilities.iter().zip(&manifest.draws))
    {
        let path = dir.join(&f.name);
        let bytes = read_bytes(&path)?;
        check_hash(f.name.clone(), &f.sha256, &sha256_hex(&bytes))?;
        let (series, imbalance) = parse_series(model, &path, &bytes)?;
        let (imbalance_short, imbalance_long) = imbalance.ok_or_else(|| {
            VppError::Scenario(format!("{}: missing imbalance prices", path.display()))
        })?;
        let sc = Scenario {
            series,
            imbalance_short,
            imbalance_long,
            probability: p,
            draws: draws.clone(),
        };
        model.check_scenario(&sc)?;
        scenarios.push(sc);
    }
    Ok((
        ScenarioSet {
            scenarios,
            seed: manifest.seed,
        },
        manifest,
    ))
}

fn first_stage_table(h: &Horizon, x: &FirstStageDecision) -> Table {
    let mut t = Table::default();
    t.push("step", (0..h.steps).map(|s| s as f64).collect());
    t.push(
        "window",
        (0..h.steps).map(|s| h.window_of(s) as f64).collect(),
    );
    t.push("dam_kw", x.dam_kw.clone());
    t.push("rcm_up_kw", per_window_to_steps(h, &x.rcm_up_kw));
    t.push("rcm_dn_kw", per_window_to_steps(h, &x.rcm_dn_kw));
    t
}

fn parse_first_stage(h: &Horizon, path: &Path, bytes: &[u8]) -> Result<FirstStageDecision> {
    let t = ReadTable::parse(path, bytes)?;
    if t.rows.len() != h.steps {
        return Err(VppError::Length {
            what: "first-stage rows",
            expected: h.steps,
            got: t.rows.len(),
        });
    }
    Ok(FirstStageDecision {
        dam_kw: t.column("dam_kw")?,
        rcm_up_kw: steps_to_per_window(h, &t.column("rcm_up_kw")?, "rcm_up_kw")?,
        rcm_dn_kw: steps_to_per_window(h, &t.column("rcm_dn_kw")?, "rcm_dn_kw")?,
    })
}

fn dispatch_table(model: &VppModel, d: &DispatchSeries) -> Table {
    let steps = model.horizon.steps;
    let p = &model.park;
    let mut t = Table::default();
    t.push("step", (0..steps).map(|s| s as f64).collect());
    t.push("ram_up_kw", d.ram_up.clone());
    t.push("ram_dn_kw", d.ram_dn.clone());
    t.push("imb_short_kw", d.imb_short.clone());
    t.push("imb_long_kw", d.imb_long.clone());
    t.push("pcc_kw", d.pcc_kw.clone());
    t.push("withdrawal_kw", d.withdrawal_kw.clone());
    for (g, v) in p.dgs.iter().zip(&d.dg_power) {
        t.push(format!("dg_p_{}", g.id), v.clone());
    }
    for (k, hp) in p.hps.iter().enumerate() {
        t.push(format!("hp_p_{}", hp.id), d.hp_power[k].clone());
        t.push(format!("hp_temp_{}", hp.id), d.hp_temp[k].clone());
    }
    for (k, e) in p.evs.iter().enumerate() {
        t.push(format!("ev_charge_{}", e.id), d.ev_charge[k].clone());
        t.push(format!("ev_discharge_{}", e.id), d.ev_discharge[k].clone());
        t.push(format!("ev_soc_{}", e.id), d.ev_soc[k].clone());
    }
    for (k, b) in p.bess.iter().enumerate() {
        t.push(format!("bess_charge_{}", b.id), d.bess_charge[k].clone());
        t.push(
            format!("bess_discharge_{}", b.id),
            d.bess_discharge[k].clone(),
        );
        t.push(format!("bess_soc_{}", b.id), d.bess_soc[k].clone());
    }
    t
}

fn parse_dispatch(model: &VppModel, path: &Path, bytes: &[u8]) -> Result<DispatchSeries> {
    let t = ReadTable::parse(path, bytes)?;
    let steps = model.horizon.steps;
    if t.rows.len() != steps {
        return Err(VppError::Length {
            what: "dispatch rows",
            expected: steps,
            got: t.rows.len(),
        });
    }
    let p = &model.park;
    let cols = |prefix: &str, ids: &mut dyn Iterator<Item = &String>| -> Result<Vec<Vec<f64>>> {
        ids.map(|id| t.column(&format!("{prefix}{id}"))).collect()
    };
    Ok(DispatchSeries {
        ram_up: t.column("ram_up_kw")?,
        ram_dn: t.column("ram_dn_kw")?,
        imb_short: t.column("imb_short_kw")?,
        imb_long: t.column("imb_long_kw")?,
        pcc_kw: t.column("pcc_kw")?,
        withdrawal_kw: t.column("withdrawal_kw")?,
        dg_power: cols("dg_p_", &mut p.dgs.iter().map(|d| &d.id))?,
        hp_power: cols("hp_p_", &mut p.hps.iter().map(|d| &d.id))?,
        hp_temp: cols("hp_temp_", &mut p.hps.iter().map(|d| &d.id))?,
        ev_charge: cols("ev_charge_", &mut p.evs.iter().map(|d| &d.id))?,
        ev_discharge: cols("ev_discharge_", &mut p.evs.iter().map(|d| &d.id))?,
        ev_soc: cols("ev_soc_", &mut p.evs.iter().map(|d| &d.id))?,
        bess_charge: cols("bess_charge_", &mut p.bess.iter().map(|d| &d.id))?,
        bess_discharge: cols("bess_discharge_", &mut p.bess.iter().map(|d| &d.id))?,
        bess_soc: cols("bess_soc_", &mut p.bess.iter().map(|d| &d.id))?,
    })
}

fn breakdown_table(probabilities: &[f64], rows: &[CostBreakdown]) -> Table {
    let col = |f: fn(&CostBreakdown) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let mut t = Table::default();
    t.push("scenario", (0..rows.len()).map(|s| s as f64).collect());
    t.push("probability", probabilities.to_vec());
    t.push("dam_revenue", col(|b| b.dam_revenue));
    t.push("rcm_revenue", col(|b| b.rcm_revenue));
    t.push("ram_revenue", col(|b| b.ram_revenue));
    t.push("operations", col(|b| b.operations));
    t.push("tariff", col(|b| b.tariff));
    t.push("imbalance", col(|b| b.imbalance));
    t.push("total_cost", col(|b| b.total));
    t.push("profit", col(|b| b.profit()));
    t
}

pub fn write_convergence_csv(path: &Path, r: &ConvergenceReport) -> Result<()> {
    let mut t = Table::default();
    t.push("iteration", (1..=r.iterations).map(|k| k as f64).collect());
    t.push("lower_bound", r.lower_bounds.clone());
    t.push("upper_bound", r.upper_bounds.clone());
    t.push("best_upper_bound", r.best_upper_bounds.clone());
    t.push("gap", r.gaps.clone());
    t.push("wall_seconds", r.wall_seconds.clone());
    t.push(
        "subproblems",
        r.subproblems_solved.iter().map(|&v| v as f64).collect(),
    );
    t.push(
        "cuts_added",
        r.cuts_added.iter().map(|&v| v as f64).collect(),
    );
    write_bytes(path, &t.to_csv()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub format_version: u32,
    pub model_hash: String,
    pub scenario_manifest_hash: String,
    pub method: String,
    pub risk: crate::stochastic::RiskMeasure,
    /// Risk functional of the scenario costs at the bids.
    pub objective: f64,
    pub expected_cost: f64,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub files: Vec<FileDigest>,
}

pub struct SolutionDump<'a> {
    pub model: &'a VppModel,
    pub solution: &'a StochasticSolution,
    pub report: Option<&'a ConvergenceReport>,
    pub method: &'a str,
    pub model_hash: &'a str,
    pub scenario_manifest_hash: &'a str,
}

/// Writes `first_stage.csv`, `breakdown.csv`, `dispatch/scenario_*.csv`,
/// `convergence.csv` (Benders only) and `summary.json`.
pub fn write_solution(dir: &Path, dump: &SolutionDump<'_>) -> Result<SolutionSummary> {
    let model = dump.model;
    let sol = dump.solution;
    create_dir(&dir.join("dispatch"))?;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        write_bytes(&dir.join(&name), &bytes)?;
        files.push(FileDigest {
            sha256: sha256_hex(&bytes),
            name,
        });
        Ok(())
    };
    put(
        "first_stage.csv".into(),
        first_stage_table(&model.horizon, &sol.first_stage).to_csv()?,
    )?;
    let breakdowns: Vec<CostBreakdown> = sol.outcomes.iter().map(|o| o.breakdown).collect();
    put(
        "breakdown.csv".into(),
        breakdown_table(&sol.probabilities, &breakdowns).to_csv()?,
    )?;
    for (s, o) in sol.outcomes.iter().enumerate() {
        let name = format!("dispatch/{}", scenario_file_name(s, sol.outcomes.len()));
        put(name, dispatch_table(model, &o.dispatch).to_csv()?)?;
    }
    if let Some(r) = dump.report {
        let path = dir.join("convergence.csv");
        write_convergence_csv(&path, r)?;
    }
    let summary = SolutionSummary {
        format_version: FORMAT_VERSION,
        model_hash: dump.model_hash.to_owned(),
        scenario_manifest_hash: dump.scenario_manifest_hash.to_owned(),
        method: dump.method.to_owned(),
        risk: sol.risk,
        objective: sol.objective,
        expected_cost: sol.expected_cost(),
        converged: dump.report.map(|r| r.converged),
        iterations: dump.report.map(|r| r.iterations),
        files,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Persisted primal solution: bids and per-scenario dispatch.
#[derive(Debug, Clone)]
pub struct StoredSolution {
    pub summary: SolutionSummary,
    pub first_stage: FirstStageDecision,
    pub dispatch: Vec<DispatchSeries>,
}

pub fn read_solution(dir: &Path, model: &VppModel) -> Result<StoredSolution> {
    let summary_path = dir.join(SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(VppError::Config(format!(
            "no solution summary at {}",
            summary_path.display()
        )));
    }
    let summary: SolutionSummary = read_json(&summary_path)?;
    let mut first_stage = None;
    let mut dispatch = Vec::new();
    for f in &summary.files {
        let path = dir.join(&f.name);
        let bytes = read_bytes(&path)?;
        check_hash(f.name.clone(), &f.sha256, &sha256_hex(&bytes))?;
        if f.name == "first_stage.csv" {
            first_stage = Some(parse_first_stage(&model.horizon, &path, &bytes)?);
        } else if f.name.starts_with("dispatch/") {
            dispatch.push(parse_dispatch(model, &path, &bytes)?);
        }
    }
    let first_stage =
        first_stage.ok_or_else(|| VppError::Config("solution lacks first_stage.csv".into()))?;
    Ok(StoredSolution {
        summary,
        first_stage,
        dispatch,
    })
}

/// Writes `report.json`, `histogram.csv`, `streams.csv` and
/// `profits.csv` (per-scenario recomputed breakdowns).
pub fn write_profit_report(
    dir: &Path,
    report: &ProfitReport,
    probabilities: &[f64],
    rows: &[CostBreakdown],
) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("report.json"), report)?;
    let mut h = Table::default();
    h.push(
        "lower_profit",
        report.histogram.iter().map(|b| b.lower).collect(),
    );
    h.push(
        "upper_profit",
        report.histogram.iter().map(|b| b.upper).collect(),
    );
    h.push(
        "probability",
        report.histogram.iter().map(|b| b.probability).collect(),
    );
    write_bytes(&dir.join("histogram.csv"), &h.to_csv()?)?;

    let e = &report.expected;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stream", "expected_profit_contribution"])?;
    for (name, v) in [
        ("dam_revenue", e.dam_revenue),
        ("rcm_revenue", e.rcm_revenue),
        ("ram_revenue", e.ram_revenue),
        ("operations", -e.operations),
        ("tariff", -e.tariff),
        ("imbalance", -e.imbalance),
        ("total", -e.total),
    ] {
        w.write_record([name.to_owned(), fmt_f64(v)])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| VppError::Config(format!("csv buffer: {e}")))?;
    write_bytes(&dir.join("streams.csv"), &bytes)?;
    write_bytes(
        &dir.join("profits.csv"),
        &breakdown_table(probabilities, rows).to_csv()?,
    )
}

/// Writes `sweep.csv` (one row per level) and `pcc_profile.csv` (expected
/// PCC import per step, one column per level).
pub fn write_sweep(dir: &Path, horizon: &Horizon, rows: &[SweepRow]) -> Result<()> {
    create_dir(dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "level",
        "expected_profit",
        "profit_change_pct",
        "low_window_withdrawal_kwh",
        "low_window_change_pct",
        "high_window_withdrawal_kwh",
        "high_window_change_pct",
        "low_window_import_kwh",
        "high_window_import_kwh",
        "error",
    ])?;
    for r in rows {
        let mut rec: Vec<String> = [
            r.level,
            r.expected_profit,
            r.profit_change_pct,
            r.low_window_withdrawal_kwh,
            r.low_window_change_pct,
            r.high_window_withdrawal_kwh,
            r.high_window_change_pct,
            r.low_window_import_kwh,
            r.high_window_import_kwh,
        ]
        .iter()
        .map(|&v| fmt_f64(v))
        .collect();
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| VppError::Config(format!("csv buffer: {e}")))?;
    write_bytes(&dir.join("sweep.csv"), &bytes)?;

    let mut t = Table::default();
    t.push("step", (0..horizon.steps).map(|s| s as f64).collect());
    t.push(
        "hour",
        (0..horizon.steps).map(|s| horizon.clock_hour(s)).collect(),
    );
    for r in rows {
        t.push(format!("level_{}", r.level), r.pcc_profile_kw.clone());
    }
    write_bytes(&dir.join("pcc_profile.csv"), &t.to_csv()?)
}

fn write_records<T: Serialize>(path: &Path, items: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if items.is_empty() {
        w.write_record(header)?;
    }
    for it in items {
        w.serialize(it)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| VppError::Config(format!("csv buffer: {e}")))?;
    write_bytes(path, &bytes)
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let bytes = read_bytes(path)?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    r.deserialize()
        .map(|rec| rec.map_err(VppError::from))
        .collect()
}

// Column headers of the network and device tables, matching the struct
// field names.
pub const BUS_COLUMNS: &[&str] = &[
    "id",
    "v_min",
    "v_max",
    "is_root",
    "peak_load_kw",
    "peak_load_kvar",
];
pub const BRANCH_COLUMNS: &[&str] = &["from", "to", "r", "x", "s_max_kva"];
pub const PV_COLUMNS: &[&str] = &["id", "bus", "nominal_kw", "inverter_kva", "marginal_cost"];
pub const HEAT_PUMP_COLUMNS: &[&str] = &[
    "id",
    "bus",
    "max_elec_kw",
    "cop",
    "resistance",
    "capacitance",
    "comfort_min",
    "comfort_max",
    "initial_temp",
];
pub const EV_COLUMNS: &[&str] = &[
    "id",
    "bus",
    "arrival",
    "departure",
    "battery_kwh",
    "arrival_soc_kwh",
    "max_charge_kw",
    "max_discharge_kw",
    "charge_eff",
    "discharge_eff",
    "min_avg_charge_kw",
    "discharge_cost",
];
pub const BESS_COLUMNS: &[&str] = &[
    "id",
    "bus",
    "energy_kwh",
    "max_power_kw",
    "inverter_kva",
    "charge_eff",
    "discharge_eff",
    "initial_soc_kwh",
    "cycle_cost",
];

pub fn write_buses(path: &Path, buses: &[Bus]) -> Result<()> {
    write_records(path, buses, BUS_COLUMNS)
}

pub fn read_buses(path: &Path) -> Result<Vec<Bus>> {
    read_records(path)
}

pub fn write_branches(path: &Path, branches: &[Branch]) -> Result<()> {
    write_records(path, branches, BRANCH_COLUMNS)
}

pub fn read_branches(path: &Path) -> Result<Vec<Branch>> {
    read_records(path)
}

/// Paths of the per-class device tables; a missing entry means no devices
/// of that class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceFiles {
    pub pv: Option<PathBuf>,
    pub heat_pumps: Option<PathBuf>,
    pub ev_events: Option<PathBuf>,
    pub batteries: Option<PathBuf>,
}

fn read_optional<T: DeserializeOwned>(base: &Path, p: &Option<PathBuf>) -> Result<Vec<T>> {
    p.as_ref()
        .map_or(Ok(Vec::new()), |p| read_records(&base.join(p)))
}

pub fn read_park(base: &Path, files: &DeviceFiles) -> Result<DerPark> {
    Ok(DerPark {
        dgs: read_optional::<DistributedGenerator>(base, &files.pv)?,
        hps: read_optional::<HeatPump>(base, &files.heat_pumps)?,
        evs: read_optional::<EvChargingEvent>(base, &files.ev_events)?,
        bess: read_optional::<Bess>(base, &files.batteries)?,
    })
}

pub fn write_park(base: &Path, files: &DeviceFiles, park: &DerPark) -> Result<()> {
    if let Some(p) = &files.pv {
        write_records(&base.join(p), &park.dgs, PV_COLUMNS)?;
    }
    if let Some(p) = &files.heat_pumps {
        write_records(&base.join(p), &park.hps, HEAT_PUMP_COLUMNS)?;
    }
    if let Some(p) = &files.ev_events {
        write_records(&base.join(p), &park.evs, EV_COLUMNS)?;
    }
    if let Some(p) = &files.batteries {
        write_records(&base.join(p), &park.bess, BESS_COLUMNS)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            f64::MIN_POSITIVE,
            -0.0,
            123_456_789.123_456_79,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn scenario_names_widen_past_ten_thousand() {
        assert_eq!(scenario_file_name(7, 10), "scenario_0007.csv");
        assert_eq!(scenario_file_name(7, 12000), "scenario_00007.csv");
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::default();
        t.push("a", vec![1.5, -2.25]);
        t.push("b", vec![1e-12, 3.0]);
        let bytes = t.to_csv().unwrap();
        let r = ReadTable::parse(Path::new("mem"), &bytes).unwrap();
        assert_eq!(r.column("b").unwrap(), vec![1e-12, 3.0]);
        assert!(r.column("c").is_err());
    }
}
