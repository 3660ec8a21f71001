//! Forecast-error model and scenario sampling.
//!
//! Each scenario draws one scalar per error type and applies it uniformly to
//! every step (and every device) of the series it targets. Draws come from a
//! Latin hypercube over the unit cube mapped through the inverse CDFs.
//!
//! Randomness uses `ChaCha8Rng::seed_from_u64`, a counter-based stream
//! cipher generator with a fixed, documented output sequence, so a seed
//! reproduces the same scenarios on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, VppError};
use crate::horizon::Horizon;

/// Smallest probability handed to the normal quantile, so `u = 0` stays finite.
pub const QUANTILE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Load,
    Generation,
    Temperature,
    EvAvailability,
    DayAhead,
    ReserveCapacity,
    ActivationUp,
    ActivationDown,
    ManualActivationUp,
    ManualActivationDown,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 10] = [
        ErrorKind::Load,
        ErrorKind::Generation,
        ErrorKind::Temperature,
        ErrorKind::EvAvailability,
        ErrorKind::DayAhead,
        ErrorKind::ReserveCapacity,
        ErrorKind::ActivationUp,
        ErrorKind::ActivationDown,
        ErrorKind::ManualActivationUp,
        ErrorKind::ManualActivationDown,
    ];

    pub fn index(self) -> usize {
        ErrorKind::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Load => "load",
            ErrorKind::Generation => "generation",
            ErrorKind::Temperature => "temperature",
            ErrorKind::EvAvailability => "ev_availability",
            ErrorKind::DayAhead => "day_ahead",
            ErrorKind::ReserveCapacity => "reserve_capacity",
            ErrorKind::ActivationUp => "activation_up",
            ErrorKind::ActivationDown => "activation_down",
            ErrorKind::ManualActivationUp => "manual_activation_up",
            ErrorKind::ManualActivationDown => "manual_activation_down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Normal,
    /// Stored by mean and standard deviation; support is `mean ± std·√3`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub distribution: Distribution,
    pub mean: f64,
    pub std_dev: f64,
    /// Multiplicative (`x·(1+e)`) when true, additive (`x+e`) otherwise.
    pub relative: bool,
}

impl ErrorSpec {
    pub fn normal(std_dev: f64, relative: bool) -> Self {
        ErrorSpec {
            distribution: Distribution::Normal,
            mean: 0.0,
            std_dev,
            relative,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std_dev >= 0.0) || !self.std_dev.is_finite() || !self.mean.is_finite() {
            return Err(VppError::Scenario(format!(
                "error spec needs finite mean and nonnegative std, got mean {} std {}",
                self.mean, self.std_dev
            )));
        }
        Ok(())
    }
}

/// The ten lumped forecast errors, one spec per [`ErrorKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "std::collections::BTreeMap<ErrorKind, ErrorSpec>")]
#[serde(into = "std::collections::BTreeMap<ErrorKind, ErrorSpec>")]
pub struct ErrorTable {
    specs: [ErrorSpec; 10],
}

impl ErrorTable {
    /// Default magnitudes: percentages for load, PV and EV availability,
    /// kelvin for temperature, EUR/MWh (EUR/MW for capacity) for prices.
    pub fn standard() -> Self {
        ErrorTable {
            specs: [
                ErrorSpec::normal(0.1075, true),
                ErrorSpec::normal(0.0815, true),
                ErrorSpec::normal(1.5, false),
                ErrorSpec {
                    distribution: Distribution::Uniform,
                    mean: 0.10,
                    std_dev: 0.0577,
                    relative: true,
                },
                ErrorSpec::normal(4.28, false),
                ErrorSpec::normal(3.30, false),
                ErrorSpec::normal(32.08, false),
                ErrorSpec::normal(21.25, false),
                ErrorSpec::normal(63.6, false),
                ErrorSpec::normal(42.91, false),
            ],
        }
    }

    /// Every error identically zero; scenarios reproduce the base forecast.
    pub fn zero() -> Self {
        let mut t = ErrorTable::standard();
        for s in &mut t.specs {
            s.mean = 0.0;
            s.std_dev = 0.0;
        }
        t
    }

    pub fn get(&self, kind: ErrorKind) -> &ErrorSpec {
        &self.specs[kind.index()]
    }

    pub fn set(&mut self, kind: ErrorKind, spec: ErrorSpec) {
        self.specs[kind.index()] = spec;
    }

    pub fn validate(&self) -> Result<()> {
        self.specs.iter().try_for_each(ErrorSpec::validate)
    }
}

impl TryFrom<std::collections::BTreeMap<ErrorKind, ErrorSpec>> for ErrorTable {
    type Error = VppError;

    fn try_from(map: std::collections::BTreeMap<ErrorKind, ErrorSpec>) -> Result<Self> {
        let mut specs = ErrorTable::standard().specs;
        for kind in ErrorKind::ALL {
            let spec = map.get(&kind).ok_or_else(|| {
                VppError::Scenario(format!("missing error spec `{}`", kind.label()))
            })?;
            spec.validate()?;
            specs[kind.index()] = *spec;
        }
        Ok(ErrorTable { specs })
    }
}

impl From<ErrorTable> for std::collections::BTreeMap<ErrorKind, ErrorSpec> {
    fn from(t: ErrorTable) -> Self {
        ErrorKind::ALL.iter().map(|&k| (k, *t.get(k))).collect()
    }
}

/// Point forecast of every uncertain series.
///
/// Prices: day-ahead, activation and manual activation in currency/MWh;
/// reserve capacity in currency/MW per window (one entry per window).
/// Capacity factors are indexed `[dg][t]`, loads `[bus][t]` in kW / kvar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub day_ahead: Vec<f64>,
    pub rcm_up: Vec<f64>,
    pub rcm_dn: Vec<f64>,
    pub ram_up: Vec<f64>,
    pub ram_dn: Vec<f64>,
    pub mfrr_up: Vec<f64>,
    pub mfrr_dn: Vec<f64>,
    pub capacity_factor: Vec<Vec<f64>>,
    pub ambient_temp: Vec<f64>,
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
    pub ev_availability: Vec<f64>,
}

impl Forecast {
    pub fn validate(&self, horizon: &Horizon, num_dg: usize, num_buses: usize) -> Result<()> {
        let t = horizon.steps;
        let w = horizon.num_windows();
        let check = |what: &'static str, v: &[f64], n: usize| -> Result<()> {
            if v.len() != n {
                return Err(VppError::Length {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(VppError::Scenario(format!(
                    "{what} contains non-finite values"
                )));
            }
            Ok(())
        };
        check("day-ahead price", &self.day_ahead, t)?;
        check("reserve capacity up price", &self.rcm_up, w)?;
        check("reserve capacity down price", &self.rcm_dn, w)?;
        check("activation up price", &self.ram_up, t)?;
        check("activation down price", &self.ram_dn, t)?;
        check("manual activation up price", &self.mfrr_up, t)?;
        check("manual activation down price", &self.mfrr_dn, t)?;
        check("ambient temperature", &self.ambient_temp, t)?;
        check("ev availability", &self.ev_availability, t)?;
        if self.capacity_factor.len() != num_dg {
            return Err(VppError::Length {
                what: "capacity factor series",
                expected: num_dg,
                got: self.capacity_factor.len(),
            });
        }
        for cf in &self.capacity_factor {
            check("capacity factor", cf, t)?;
            if cf.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
                return Err(VppError::Scenario(
                    "capacity factors must lie in [0, 1]".into(),
                ));
            }
        }
        if self
            .ev_availability
            .iter()
            .any(|&c| !(0.0..=1.0).contains(&c))
        {
            return Err(VppError::Scenario(
                "ev availability must lie in [0, 1]".into(),
            ));
        }
        if self.load_p.len() != num_buses || self.load_q.len() != num_buses {
            return Err(VppError::Length {
                what: "bus load series",
                expected: num_buses,
                got: self.load_p.len(),
            });
        }
        for (p, q) in self.load_p.iter().zip(&self.load_q) {
            check("active load", p, t)?;
            check("reactive load", q, t)?;
        }
        Ok(())
    }
}

/// One joint realization of all series plus its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub series: Forecast,
    pub imbalance_short: Vec<f64>,
    pub imbalance_long: Vec<f64>,
    pub probability: f64,
    /// The ten error draws in [`ErrorKind::ALL`] order.
    pub draws: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Wraps a single forecast as a certain scenario.
    pub fn deterministic(base: &Forecast) -> Self {
        ScenarioSet {
            scenarios: vec![apply_draws(base, &ErrorTable::zero(), &[0.0; 10], 1.0)],
            seed: 0,
        }
    }
}

/// Latin hypercube sample of `n` points in `[0,1)^dims`, returned row-major
/// (`n` rows of `dims` values).
///
/// Per dimension, a fresh shuffle of `0..n` assigns strata to rows and a
/// uniform offset places each point inside its stratum. Dimensions consume
/// the generator in order: shuffle first, then the `n` offsets.
pub fn lhs_sample(n: usize, dims: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dims == 0 {
        return Err(VppError::Scenario(format!(
            "latin hypercube needs n >= 1 and dims >= 1, got {n}x{dims}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; dims]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let nf = n as f64;
    for d in 0..dims {
        perm.sort_unstable();
        perm.shuffle(&mut rng);
        for (i, &k) in perm.iter().enumerate() {
            let offset: f64 = rng.random();
            let mut u = (k as f64 + offset) / nf;
            // Rounding can push the point onto the next stratum boundary.
            while u > 0.0 && (u * nf).floor() as usize > k {
                u = u.next_down();
            }
            out[i][d] = u;
        }
    }
    Ok(out)
}

/// Maps a uniform sample onto the error distribution.
pub fn inverse_transform(u: f64, spec: &ErrorSpec) -> f64 {
    match spec.distribution {
        Distribution::Normal => {
            let standard = Normal::standard();
            let z = standard.inverse_cdf(u.clamp(QUANTILE_FLOOR, 1.0 - QUANTILE_FLOOR));
            spec.mean + spec.std_dev * z
        }
        Distribution::Uniform => spec.mean + spec.std_dev * 3f64.sqrt() * (2.0 * u - 1.0),
    }
}

/// Dual imbalance prices: short pays the worse of day-ahead and manual up
/// activation, long receives the worse of day-ahead and manual down.
pub fn imbalance_prices(
    day_ahead: &[f64],
    mfrr_up: &[f64],
    mfrr_dn: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let short = day_ahead
        .iter()
        .zip(mfrr_up)
        .map(|(&d, &u)| d.max(u))
        .collect();
    let long = day_ahead
        .iter()
        .zip(mfrr_dn)
        .map(|(&d, &l)| d.min(l))
        .collect();
    (short, long)
}

fn apply(x: f64, e: f64, spec: &ErrorSpec) -> f64 {
    if spec.relative {
        x * (1.0 + e)
    } else {
        x + e
    }
}

/// Builds one scenario from a vector of ten error draws.
pub fn apply_draws(
    base: &Forecast,
    table: &ErrorTable,
    draws: &[f64],
    probability: f64,
) -> Scenario {
    let spec = |k: ErrorKind| table.get(k);
    let e = |k: ErrorKind| draws[k.index()];
    let map = |v: &[f64], k: ErrorKind| -> Vec<f64> {
        v.iter().map(|&x| apply(x, e(k), spec(k))).collect()
    };
    let map_clamped = |v: &[f64], k: ErrorKind, lo: f64, hi: f64| -> Vec<f64> {
        v.iter()
            .map(|&x| apply(x, e(k), spec(k)).clamp(lo, hi))
            .collect()
    };

    let day_ahead = map(&base.day_ahead, ErrorKind::DayAhead);
    let mfrr_up = map(&base.mfrr_up, ErrorKind::ManualActivationUp);
    let mfrr_dn = map(&base.mfrr_dn, ErrorKind::ManualActivationDown);
    let (imbalance_short, imbalance_long) = imbalance_prices(&day_ahead, &mfrr_up, &mfrr_dn);
    let series = Forecast {
        rcm_up: map_clamped(&base.rcm_up, ErrorKind::ReserveCapacity, 0.0, f64::INFINITY),
        rcm_dn: map_clamped(&base.rcm_dn, ErrorKind::ReserveCapacity, 0.0, f64::INFINITY),
        ram_up: map(&base.ram_up, ErrorKind::ActivationUp),
        ram_dn: map(&base.ram_dn, ErrorKind::ActivationDown),
        capacity_factor: base
            .capacity_factor
            .iter()
            .map(|cf| map_clamped(cf, ErrorKind::Generation, 0.0, 1.0))
            .collect(),
        ambient_temp: map(&base.ambient_temp, ErrorKind::Temperature),
        load_p: base
            .load_p
            .iter()
            .map(|l| map(l, ErrorKind::Load))
            .collect(),
        load_q: base
            .load_q
            .iter()
            .map(|l| map(l, ErrorKind::Load))
            .collect(),
        ev_availability: map_clamped(&base.ev_availability, ErrorKind::EvAvailability, 0.0, 1.0),
        day_ahead,
        mfrr_up,
        mfrr_dn,
    };
    Scenario {
        series,
        imbalance_short,
        imbalance_long,
        probability,
        draws: draws.to_vec(),
    }
}

/// Samples `n` equiprobable scenarios around `base`.
pub fn build_scenarios(
    base: &Forecast,
    table: &ErrorTable,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(VppError::Scenario(
            "scenario count must be at least 1".into(),
        ));
    }
    table.validate()?;
    let u = lhs_sample(n, ErrorKind::ALL.len(), seed)?;
    let p = 1.0 / n as f64;
    let scenarios = u
        .iter()
        .map(|row| {
            let draws: Vec<f64> = ErrorKind::ALL
                .iter()
                .zip(row)
                .map(|(&k, &ui)| inverse_transform(ui, table.get(k)))
                .collect();
            apply_draws(base, table, &draws, p)
        })
        .collect();
    Ok(ScenarioSet { scenarios, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_forecast() -> Forecast {
        Forecast {
            day_ahead: vec![80.0, 120.0],
            rcm_up: vec![5.0],
            rcm_dn: vec![2.0],
            ram_up: vec![90.0, 95.0],
            ram_dn: vec![30.0, 20.0],
            mfrr_up: vec![130.0, 150.0],
            mfrr_dn: vec![40.0, 60.0],
            capacity_factor: vec![vec![0.0, 0.95]],
            ambient_temp: vec![4.0, 6.0],
            load_p: vec![vec![0.0, 0.0], vec![3.0, 4.0]],
            load_q: vec![vec![0.0, 0.0], vec![1.0, 1.2]],
            ev_availability: vec![0.8, 0.9],
        }
    }

    #[test]
    fn lhs_one_point_per_quarter() {
        let u = lhs_sample(4, 1, 3).unwrap();
        let mut strata: Vec<usize> = u.iter().map(|r| (r[0] * 4.0).floor() as usize).collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lhs_rejects_empty_shapes() {
        assert!(lhs_sample(0, 3, 1).is_err());
        assert!(lhs_sample(3, 0, 1).is_err());
    }

    #[test]
    fn lhs_is_seed_deterministic() {
        assert_eq!(
            lhs_sample(50, 10, 7).unwrap(),
            lhs_sample(50, 10, 7).unwrap()
        );
        assert_ne!(
            lhs_sample(50, 10, 7).unwrap(),
            lhs_sample(50, 10, 8).unwrap()
        );
    }

    #[test]
    fn median_of_table_errors() {
        let t = ErrorTable::standard();
        assert_eq!(inverse_transform(0.5, t.get(ErrorKind::DayAhead)), 0.0);
        let ev = inverse_transform(0.5, t.get(ErrorKind::EvAvailability));
        assert!((ev - 0.10).abs() < 1e-15);
    }

    #[test]
    fn uniform_support_edges() {
        let spec = ErrorTable::standard()
            .get(ErrorKind::EvAvailability)
            .to_owned();
        let lo = inverse_transform(0.0, &spec);
        let hi = inverse_transform(1.0, &spec);
        assert!((lo - (0.10 - 0.0577 * 3f64.sqrt())).abs() < 1e-15);
        assert!((hi - (0.10 + 0.0577 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn zero_quantile_is_finite() {
        let z = inverse_transform(0.0, &ErrorSpec::normal(1.0, false));
        assert!(z.is_finite() && z < -7.0);
    }

    #[test]
    fn imbalance_price_rule() {
        assert_eq!(
            imbalance_prices(&[100.0], &[150.0], &[60.0]),
            (vec![150.0], vec![60.0])
        );
        assert_eq!(
            imbalance_prices(&[100.0], &[100.0], &[100.0]),
            (vec![100.0], vec![100.0])
        );
        assert_eq!(
            imbalance_prices(&[100.0], &[80.0], &[120.0]),
            (vec![100.0], vec![100.0])
        );
    }

    #[test]
    fn zero_errors_pass_forecast_through() {
        let base = tiny_forecast();
        let set = build_scenarios(&base, &ErrorTable::zero(), 3, 11).unwrap();
        for s in &set.scenarios {
            assert_eq!(s.series, base);
        }
    }

    #[test]
    fn equal_weights() {
        let set = build_scenarios(&tiny_forecast(), &ErrorTable::standard(), 2, 1).unwrap();
        assert_eq!(set.probabilities(), vec![0.5, 0.5]);
    }

    #[test]
    fn generation_error_scales_then_clamps() {
        let base = tiny_forecast();
        let table = ErrorTable::standard();
        let mut draws = [0.0; 10];
        draws[ErrorKind::Generation.index()] = 0.0815;
        let s = apply_draws(&base, &table, &draws, 1.0);
        assert_eq!(s.series.capacity_factor[0][0], 0.0);
        assert_eq!(s.series.capacity_factor[0][1], 1.0);
        draws[ErrorKind::Generation.index()] = -0.0815;
        let s = apply_draws(&base, &table, &draws, 1.0);
        assert_eq!(s.series.capacity_factor[0][1], 0.95 * (1.0 - 0.0815));
    }

    #[test]
    fn reserve_capacity_price_floor() {
        let mut draws = [0.0; 10];
        draws[ErrorKind::ReserveCapacity.index()] = -3.0;
        let s = apply_draws(&tiny_forecast(), &ErrorTable::standard(), &draws, 1.0);
        assert_eq!(s.series.rcm_up, vec![2.0]);
        assert_eq!(s.series.rcm_dn, vec![0.0]);
    }

    #[test]
    fn manual_errors_only_touch_imbalance() {
        let base = tiny_forecast();
        let mut draws = [0.0; 10];
        draws[ErrorKind::ManualActivationUp.index()] = 50.0;
        let s = apply_draws(&base, &ErrorTable::standard(), &draws, 1.0);
        assert_eq!(s.series.ram_up, base.ram_up);
        assert_eq!(s.imbalance_short, vec![180.0, 200.0]);
    }

    #[test]
    fn table_round_trips_through_json() {
        let t = ErrorTable::standard();
        let text = serde_json::to_string(&t).unwrap();
        let back: ErrorTable = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);
        let mut map: serde_json::Value = serde_json::from_str(&text).unwrap();
        map.as_object_mut().unwrap().remove("load");
        assert!(serde_json::from_value::<ErrorTable>(map).is_err());
    }
}
