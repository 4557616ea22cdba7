//! Hierarchical window sampling: a monthly seasonal chain, `n_s` windows of
//! `w_s` consecutive days per month, and `n_rt` windows of `w_rt`
//! consecutive hours per simulated day.

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::stochastic::{
    day_of_year, days_in_month, sample_day_ahead, seasonal_step, simulate_day, DayAheadForecast, HourlyRealization,
    ProcessParams, SeasonalFactor, HOURS_PER_DAY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    pub w_s: usize,
    pub n_s: usize,
    pub w_rt: usize,
    pub n_rt: usize,
    pub months: u8,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { w_s: 3, n_s: 4, w_rt: 24, n_rt: 2, months: 12 }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.w_s == 0 || self.n_s == 0 || self.w_rt == 0 || self.n_rt == 0 || self.months == 0 {
            return Err(Error::validation("sampler", "all parameters must be positive"));
        }
        if self.w_rt > HOURS_PER_DAY {
            return Err(Error::validation("sampler.w_rt", "at most 24 hours"));
        }
        if self.months > 12 {
            return Err(Error::validation("sampler.months", "at most 12"));
        }
        for m in 1..=self.months {
            if self.n_s * self.w_s > days_in_month(m) {
                return Err(Error::InfeasibleWindow {
                    month: m,
                    windows: self.n_s,
                    days: self.w_s,
                    month_days: days_in_month(m),
                });
            }
        }
        Ok(())
    }

    pub fn days_per_scenario(&self) -> usize {
        usize::from(self.months) * self.n_s * self.w_s
    }

    pub fn rt_hours_per_scenario(&self) -> usize {
        self.days_per_scenario() * self.n_rt * self.w_rt
    }
}

/// Factor scaling the sampled days of `month` to the whole month.
pub fn scenario_weight(params: &SamplerParams, month: u8) -> f64 {
    days_in_month(month) as f64 / (params.n_s * params.w_s) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start_hour: usize,
    pub hours: Vec<HourlyRealization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySample {
    pub day_of_year: usize,
    pub forecast: DayAheadForecast,
    pub hour_windows: Vec<HourWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayWindow {
    /// First day of the window, 1-based day of month.
    pub start_day: usize,
    pub days: Vec<DaySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSample {
    pub month: u8,
    pub seasonal: SeasonalFactor,
    pub windows: Vec<DayWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    pub months: Vec<MonthSample>,
}

impl ScenarioSample {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sample serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("scenario dump", e))
    }
}

/// 0-based start offsets of `n` non-overlapping windows of `w` slots in
/// `0..len`, uniform over all such placements.
pub fn window_starts(len: usize, n: usize, w: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(n * w <= len);
    // Placements are in bijection with n-subsets of 0..len − n·w + n.
    let mut picks = index::sample(rng, len - n * w + n, n).into_vec();
    picks.sort_unstable();
    picks.iter().enumerate().map(|(k, &c)| c + k * (w - 1)).collect()
}

fn sample_month(
    case: &GridCase,
    params: &SamplerParams,
    process: &ProcessParams,
    month: u8,
    seasonal: SeasonalFactor,
    rng: &mut ChaCha8Rng,
) -> MonthSample {
    let starts = window_starts(days_in_month(month), params.n_s, params.w_s, rng);
    let windows = starts
        .into_iter()
        .map(|s| {
            let days = (0..params.w_s)
                .map(|d| {
                    let doy = day_of_year(month, s + d + 1);
                    let forecast = sample_day_ahead(case, doy, seasonal, process, rng);
                    let hour_windows = (0..params.n_rt)
                        .map(|_| {
                            let start_hour =
                                if params.w_rt < HOURS_PER_DAY { rng.random_range(0..=HOURS_PER_DAY - params.w_rt) } else { 0 };
                            let walk = simulate_day(case, &forecast, start_hour + params.w_rt, process, rng);
                            HourWindow { start_hour, hours: walk[start_hour..].to_vec() }
                        })
                        .collect();
                    DaySample { day_of_year: doy, forecast, hour_windows }
                })
                .collect();
            DayWindow { start_day: s + 1, days }
        })
        .collect();
    MonthSample { month, seasonal, windows }
}

/// Seasonal factors of months `1..=params.months`, starting from the
/// December profile.
pub fn sample_seasonal_chain(params: &SamplerParams, process: &ProcessParams, rng: &mut impl Rng) -> Vec<SeasonalFactor> {
    let mut prev = process.monthly_profile(12);
    (1..=params.months)
        .map(|m| {
            prev = seasonal_step(prev, m, process, rng);
            prev
        })
        .collect()
}

/// Samples one scenario. The seasonal chain is drawn first; each month then
/// samples from its own stream, so months can run in parallel.
pub fn sample_scenario(
    case: &GridCase,
    params: &SamplerParams,
    process: &ProcessParams,
    rng: &mut impl Rng,
) -> Result<ScenarioSample> {
    params.validate()?;
    let chain = sample_seasonal_chain(params, process, rng);
    sample_scenario_with_chain(case, params, process, &chain, rng)
}

/// Samples one scenario along a given seasonal chain.
pub fn sample_scenario_with_chain(
    case: &GridCase,
    params: &SamplerParams,
    process: &ProcessParams,
    chain: &[SeasonalFactor],
    rng: &mut impl Rng,
) -> Result<ScenarioSample> {
    params.validate()?;
    if chain.len() != usize::from(params.months) {
        return Err(Error::validation("seasonal chain", format!("{} factors for {} months", chain.len(), params.months)));
    }
    let seeds: Vec<u64> = chain.iter().map(|_| rng.random()).collect();
    let months = (1..=params.months)
        .zip(chain)
        .zip(seeds)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|((m, &j), seed)| sample_month(case, params, process, m, j, &mut ChaCha8Rng::seed_from_u64(seed)))
        .collect();
    Ok(ScenarioSample { months })
}
