//! Exogenous random processes: the seasonal factor, day-ahead wind and
//! load forecasts, hourly biased random walks around them, and topology
//! sampling for proxy training.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridCase, Topology};

pub const HOURS_PER_DAY: usize = 24;

const MONTH_DAYS: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Days in `month` (1-based) of a non-leap year.
pub fn days_in_month(month: u8) -> usize {
    MONTH_DAYS[usize::from(month) - 1]
}

/// Day of year (1-based) of `day` (1-based) in `month`.
pub fn day_of_year(month: u8, day: usize) -> usize {
    MONTH_DAYS[..usize::from(month) - 1].iter().sum::<usize>() + day
}

pub fn month_of_day(day_of_year: usize) -> u8 {
    let mut left = day_of_year;
    for (m, &d) in MONTH_DAYS.iter().enumerate() {
        if left <= d {
            return m as u8 + 1;
        }
        left -= d;
    }
    12
}

/// Winter-weekday hourly load shape, fraction of the daily peak.
pub const HOURLY_LOAD_SHAPE: [f64; 24] = [
    0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95, 0.95, 0.95, 0.93, 0.94, 0.99, 1.00,
    1.00, 0.96, 0.91, 0.83, 0.73, 0.63,
];

/// Mean hourly wind output, fraction of installed capacity; windier at night.
pub const HOURLY_WIND_SHAPE: [f64; 24] = [
    0.62, 0.63, 0.64, 0.64, 0.63, 0.61, 0.58, 0.54, 0.50, 0.47, 0.45, 0.44, 0.44, 0.45, 0.46, 0.48, 0.50, 0.52,
    0.54, 0.56, 0.58, 0.59, 0.60, 0.61,
];

pub const MONTHLY_LOAD_PROFILE: [f64; 12] = [0.93, 0.90, 0.82, 0.76, 0.74, 0.83, 0.90, 0.88, 0.79, 0.77, 0.86, 0.96];

pub const MONTHLY_WIND_PROFILE: [f64; 12] = [0.95, 0.92, 0.88, 0.80, 0.70, 0.60, 0.55, 0.58, 0.68, 0.80, 0.90, 0.94];

/// The two components of the seasonal weather factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalFactor {
    pub wind_level: f64,
    pub load_level: f64,
}

/// Day-ahead forecast, rows = element, columns = hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAheadForecast {
    pub wind: Vec<Vec<f64>>,
    pub load: Vec<Vec<f64>>,
}

impl DayAheadForecast {
    pub fn hours(&self) -> usize {
        self.load.first().or(self.wind.first()).map_or(0, Vec::len)
    }

    pub fn wind_at(&self, hour: usize) -> Vec<f64> {
        self.wind.iter().map(|r| r[hour]).collect()
    }

    pub fn load_at(&self, hour: usize) -> Vec<f64> {
        self.load.iter().map(|r| r[hour]).collect()
    }

    /// Forecast shortened to its first `hours` columns.
    pub fn truncated(&self, hours: usize) -> Self {
        let cut = |m: &Vec<Vec<f64>>| m.iter().map(|r| r[..hours].to_vec()).collect();
        Self { wind: cut(&self.wind), load: cut(&self.load) }
    }

    /// Total system wind and load per hour.
    pub fn system_totals(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.hours();
        let sum = |m: &Vec<Vec<f64>>| (0..h).map(|t| m.iter().map(|r| r[t]).sum()).collect();
        (sum(&self.wind), sum(&self.load))
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        if self.wind.len() != case.n_wind() || self.load.len() != case.n_buses() {
            return Err(Error::validation(
                "forecast",
                format!(
                    "{}x{} rows for a case with {} wind generators and {} buses",
                    self.wind.len(),
                    self.load.len(),
                    case.n_wind(),
                    case.n_buses()
                ),
            ));
        }
        let h = self.hours();
        if self.wind.iter().chain(&self.load).any(|r| r.len() != h) {
            return Err(Error::validation("forecast", "rows have unequal lengths"));
        }
        for (i, (row, w)) in self.wind.iter().zip(&case.wind_generators).enumerate() {
            if row.iter().any(|&v| !(0.0..=w.capacity_mw + 1e-9).contains(&v)) {
                return Err(Error::validation(format!("forecast.wind[{i}]"), "outside [0, capacity]"));
            }
        }
        if self.load.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::validation("forecast.load", "negative or non-finite load"));
        }
        Ok(())
    }
}

/// Realized wind and load at one hour plus the walk offsets that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyRealization {
    pub wind: Vec<f64>,
    pub load: Vec<f64>,
    pub wind_delta: Vec<f64>,
    pub load_delta: Vec<f64>,
}

impl HourlyRealization {
    /// Zero-offset realization equal to the forecast at `hour`.
    pub fn at_forecast(forecast: &DayAheadForecast, hour: usize) -> Self {
        let wind = forecast.wind_at(hour);
        let load = forecast.load_at(hour);
        Self { wind_delta: vec![0.0; wind.len()], load_delta: vec![0.0; load.len()], wind, load }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub p_w_sigma: f64,
    pub p_d_sigma: f64,
    pub wind_walk_noise_frac: f64,
    pub load_walk_noise_frac: f64,
    pub monthly_wind_profile: Vec<f64>,
    pub monthly_load_profile: Vec<f64>,
    /// n_wind × 24, MW.
    pub daily_wind_profile_mw: Vec<Vec<f64>>,
    /// n_bus × 24, MW.
    pub daily_load_profile_mw: Vec<Vec<f64>>,
    pub seasonal_ar_coeff: f64,
    pub seasonal_noise_sd: f64,
    /// Per-line, per-hour probability of a forced outage during evaluation.
    pub forced_outage_rate: f64,
}

impl ProcessParams {
    /// Default shapes scaled to the case's peak loads and wind capacities.
    pub fn defaults_for(case: &GridCase) -> Self {
        ProcessConfig::default().resolve(case, Path::new(".")).expect("default profiles are valid")
    }

    pub fn monthly_profile(&self, month: u8) -> SeasonalFactor {
        let m = usize::from(month) - 1;
        SeasonalFactor { wind_level: self.monthly_wind_profile[m], load_level: self.monthly_load_profile[m] }
    }

    pub fn validate(&self, case: &GridCase) -> Result<()> {
        for (name, v) in [
            ("p_w_sigma", self.p_w_sigma),
            ("p_d_sigma", self.p_d_sigma),
            ("wind_walk_noise_frac", self.wind_walk_noise_frac),
            ("load_walk_noise_frac", self.load_walk_noise_frac),
            ("forced_outage_rate", self.forced_outage_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("process.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.seasonal_ar_coeff) {
            return Err(Error::validation("process.seasonal_ar_coeff", "must lie in [0, 1)"));
        }
        if !(self.seasonal_noise_sd >= 0.0 && self.seasonal_noise_sd.is_finite()) {
            return Err(Error::validation("process.seasonal_noise_sd", "must be >= 0"));
        }
        for (name, p) in [("monthly_wind_profile", &self.monthly_wind_profile), ("monthly_load_profile", &self.monthly_load_profile)] {
            if p.len() != 12 || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::validation(format!("process.{name}"), "need 12 values in [0, 1]"));
            }
        }
        let dims = |m: &Vec<Vec<f64>>, rows: usize| m.len() == rows && m.iter().all(|r| r.len() == HOURS_PER_DAY);
        if !dims(&self.daily_wind_profile_mw, case.n_wind()) {
            return Err(Error::validation("process.daily_wind_profile_MW", "need n_wind rows of 24 hours"));
        }
        if !dims(&self.daily_load_profile_mw, case.n_buses()) {
            return Err(Error::validation("process.daily_load_profile_MW", "need n_bus rows of 24 hours"));
        }
        Ok(())
    }
}

/// Process parameters as written in an experiment config; profiles are
/// generated from the case unless CSV files are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub p_w_sigma: f64,
    pub p_d_sigma: f64,
    pub wind_walk_noise_frac: f64,
    pub load_walk_noise_frac: f64,
    pub seasonal_ar_coeff: f64,
    pub seasonal_noise_sd: f64,
    pub forced_outage_rate: f64,
    pub monthly_wind_profile: Vec<f64>,
    pub monthly_load_profile: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_wind_profile_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_load_profile_csv: Option<PathBuf>,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            p_w_sigma: 0.15,
            p_d_sigma: 0.02,
            wind_walk_noise_frac: 0.005,
            load_walk_noise_frac: 0.001,
            seasonal_ar_coeff: 0.5,
            seasonal_noise_sd: 0.05,
            forced_outage_rate: 0.0,
            monthly_wind_profile: MONTHLY_WIND_PROFILE.to_vec(),
            monthly_load_profile: MONTHLY_LOAD_PROFILE.to_vec(),
            daily_wind_profile_csv: None,
            daily_load_profile_csv: None,
        }
    }
}

impl ProcessConfig {
    /// Builds the full parameter set; relative CSV paths resolve against `base`.
    pub fn resolve(&self, case: &GridCase, base: &Path) -> Result<ProcessParams> {
        let wind = match &self.daily_wind_profile_csv {
            Some(p) => read_profile_csv(&base.join(p), case.wind_generators.iter().map(|w| w.id))?,
            None => case.wind_generators.iter().map(|w| HOURLY_WIND_SHAPE.map(|s| s * w.capacity_mw).to_vec()).collect(),
        };
        let load = match &self.daily_load_profile_csv {
            Some(p) => read_profile_csv(&base.join(p), case.buses.iter().map(|b| b.id))?,
            None => case.buses.iter().map(|b| HOURLY_LOAD_SHAPE.map(|s| s * b.peak_load_mw).to_vec()).collect(),
        };
        let params = ProcessParams {
            p_w_sigma: self.p_w_sigma,
            p_d_sigma: self.p_d_sigma,
            wind_walk_noise_frac: self.wind_walk_noise_frac,
            load_walk_noise_frac: self.load_walk_noise_frac,
            monthly_wind_profile: self.monthly_wind_profile.clone(),
            monthly_load_profile: self.monthly_load_profile.clone(),
            daily_wind_profile_mw: wind,
            daily_load_profile_mw: load,
            seasonal_ar_coeff: self.seasonal_ar_coeff,
            seasonal_noise_sd: self.seasonal_noise_sd,
            forced_outage_rate: self.forced_outage_rate,
        };
        params.validate(case)?;
        Ok(params)
    }
}

/// Reads a profile CSV with header `id,h1,...,h24`; rows must list the
/// expected element ids in order.
pub fn read_profile_csv(path: &Path, ids: impl Iterator<Item = u32>) -> Result<Vec<Vec<f64>>> {
    let what = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(&what, e))?;
    let mut rows = Vec::new();
    let mut records = rdr.records();
    for id in ids {
        let rec = records
            .next()
            .ok_or_else(|| Error::parse(&what, format!("missing row for element {id}")))?
            .map_err(|e| Error::parse(&what, e))?;
        let got: u32 = rec.get(0).unwrap_or("").trim().parse().map_err(|e| Error::parse(&what, e))?;
        if got != id {
            return Err(Error::parse(&what, format!("expected element {id}, found {got}")));
        }
        let vals = rec.iter().skip(1).map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>();
        rows.push(vals.map_err(|e| Error::parse(&what, e))?);
    }
    Ok(rows)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Mean-reverting draw of next month's seasonal factor.
pub fn seasonal_step(prev: SeasonalFactor, month: u8, params: &ProcessParams, rng: &mut impl Rng) -> SeasonalFactor {
    assert!((1..=12).contains(&month), "month {month} out of range");
    let prev_month = if month == 1 { 12 } else { month - 1 };
    let now = params.monthly_profile(month);
    let before = params.monthly_profile(prev_month);
    let a = params.seasonal_ar_coeff;
    let sd = params.seasonal_noise_sd;
    let wind = now.wind_level + a * (prev.wind_level - before.wind_level) + sd * normal(rng);
    let load = now.load_level + a * (prev.load_level - before.load_level) + sd * normal(rng);
    SeasonalFactor { wind_level: wind.max(0.0), load_level: load.max(0.0) }
}

/// Draws the day-ahead wind and load forecasts of one day. The seasonal
/// factor carries the monthly level, so the mean of entry `(i, h)` is
/// `daily_profile[i][h] · J`.
pub fn sample_day_ahead(
    case: &GridCase,
    day_of_year: usize,
    j: SeasonalFactor,
    params: &ProcessParams,
    rng: &mut impl Rng,
) -> DayAheadForecast {
    assert!((1..=365).contains(&day_of_year), "day {day_of_year} out of range");
    let mut wind = Vec::with_capacity(case.n_wind());
    for (profile, w) in params.daily_wind_profile_mw.iter().zip(&case.wind_generators) {
        let row = profile
            .iter()
            .map(|&mu| {
                let mean = mu * j.wind_level;
                (mean + params.p_w_sigma * mean * normal(rng)).clamp(0.0, w.capacity_mw)
            })
            .collect();
        wind.push(row);
    }
    let mut load = Vec::with_capacity(case.n_buses());
    for profile in &params.daily_load_profile_mw {
        let row = profile
            .iter()
            .map(|&mu| {
                let mean = mu * j.load_level;
                (mean + params.p_d_sigma * mean * normal(rng)).max(0.0)
            })
            .collect();
        load.push(row);
    }
    DayAheadForecast { wind, load }
}

/// One step of a biased random walk per element:
/// `δ' = δ + ε`, `ε ~ N(0, sd)`, value = `clamp(forecast + δ')`.
pub fn walk_step(
    forecast: &[f64],
    prev_delta: &[f64],
    sd: &[f64],
    bounds: &[(f64, f64)],
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(forecast.len(), prev_delta.len());
    let mut values = Vec::with_capacity(forecast.len());
    let mut deltas = Vec::with_capacity(forecast.len());
    for i in 0..forecast.len() {
        let d = prev_delta[i] + sd[i] * normal(rng);
        values.push((forecast[i] + d).clamp(bounds[i].0, bounds[i].1));
        deltas.push(d);
    }
    (values, deltas)
}

/// Advances the realization from `hour − 1` to `hour` of the day. The walk
/// noise scale is fixed by the forecast at hour 0.
pub fn step_hourly(
    case: &GridCase,
    forecast: &DayAheadForecast,
    hour: usize,
    prev: &HourlyRealization,
    params: &ProcessParams,
    rng: &mut impl Rng,
) -> HourlyRealization {
    let wind_sd: Vec<f64> = forecast.wind.iter().map(|r| params.wind_walk_noise_frac * r[0]).collect();
    let load_sd: Vec<f64> = forecast.load.iter().map(|r| params.load_walk_noise_frac * r[0]).collect();
    let wind_bounds: Vec<(f64, f64)> = case.wind_generators.iter().map(|w| (0.0, w.capacity_mw)).collect();
    let load_bounds = vec![(0.0, f64::INFINITY); case.n_buses()];
    let (wind, wind_delta) = walk_step(&forecast.wind_at(hour), &prev.wind_delta, &wind_sd, &wind_bounds, rng);
    let (load, load_delta) = walk_step(&forecast.load_at(hour), &prev.load_delta, &load_sd, &load_bounds, rng);
    HourlyRealization { wind, load, wind_delta, load_delta }
}

/// Realizations for hours `0..end` of a day; the offset starts at zero when
/// the forecast is issued.
pub fn simulate_day(
    case: &GridCase,
    forecast: &DayAheadForecast,
    end: usize,
    params: &ProcessParams,
    rng: &mut impl Rng,
) -> Vec<HourlyRealization> {
    let mut out = Vec::with_capacity(end);
    if end == 0 {
        return out;
    }
    out.push(HourlyRealization::at_forecast(forecast, 0));
    for h in 1..end {
        let next = step_hourly(case, forecast, h, &out[h - 1], params, rng);
        out.push(next);
    }
    out
}

/// Each listed line independently out of service with probability 1/2.
pub fn sample_training_topology(n_lines: usize, outage_lines: &[usize], rng: &mut impl Rng) -> Topology {
    let mut t = Topology::all_in_service(n_lines);
    for &l in outage_lines {
        t.line_status[l] = rng.random_bool(0.5);
    }
    t
}
