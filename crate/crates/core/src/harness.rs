//! Experiment configuration, schedule assessment and the drivers behind
//! the command line.
//!
//! An assessment runs `scenarios_per_assessment` sampled years. Every
//! (scenario, month) pair is an independent task: its day windows start
//! from long-on generators, so its outcome depends only on the month's
//! maintenance topology and the seed. Month outcomes are cached on exactly
//! that key, which makes re-assessing a schedule (or one differing in a
//! few months) cheap.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ce::{
    optimize, penalized_cost, sample_schedule, validate_requirements, BarrierParams, CeDistribution, CeParams,
    OptimizeResult, OutageRequirement, OutageSchedule,
};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::grid::{apply_modifications, bundled_case, bundled_modifications, load_case, load_modifications, GridCase, Topology};
use crate::proxy::{generate_dataset, nn_lookup, DatasetParams, DistanceMode, Keying, ProxyDataset, UcQuery, DEFAULT_MIN_BUCKET};
use crate::reliability::{state_reliability, ChanceThresholds, DcChecker, ScenarioMetrics, ScheduleMetrics};
use crate::rt::{rt_operating_cost, solve_rt, RtDecision, RtOptions};
use crate::sampler::{sample_scenario_with_chain, sample_seasonal_chain, scenario_weight, MonthSample, SamplerParams, ScenarioSample};
use crate::seed::SeedTree;
use crate::stochastic::{ProcessConfig, ProcessParams, HOURS_PER_DAY};
use crate::uc::{solve_uc, InitialStatus, UcSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Proxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyConfig {
    pub n_records: usize,
    pub min_bucket: usize,
    pub distance: DistanceMode,
    /// Held-out queries for `proxy-eval`.
    pub n_test: usize,
    /// Defaults to one bit per required outage line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keying: Option<Keying>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig { n_records: 5000, min_bucket: DEFAULT_MIN_BUCKET, distance: DistanceMode::System, n_test: 200, keying: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Evaluation seeds per schedule; seed 0 is the optimizer's own.
    pub n_seeds: usize,
    pub bins: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { n_seeds: 1, bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled case name or a path relative to the config file.
    pub case: String,
    /// Bundled modification list name or path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modifications: Option<String>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy_dataset: Option<PathBuf>,
    pub scenarios_per_assessment: usize,
    /// Whether the scenarios of one assessment share a seasonal chain.
    pub shared_seasonal_chain: bool,
    pub master_seed: u64,
    pub workers: usize,
    /// Cost scale of the barrier; the empty schedule's expected cost when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_scale: Option<f64>,
    pub sampler: SamplerParams,
    pub thresholds: ChanceThresholds,
    pub ce: CeParams,
    pub rt: RtOptions,
    pub compare: CompareConfig,
    pub proxy: ProxyConfig,
    pub process: ProcessConfig,
    pub outage_requirements: Vec<OutageRequirement>,
}

fn req(line_id: u32, count: usize, allowed_months: Vec<u8>) -> OutageRequirement {
    OutageRequirement { line_id, count, allowed_months }
}

impl Default for ExperimentConfig {
    /// The 24-bus network with its bottleneck edits and the 13-outage plan.
    fn default() -> Self {
        let all: Vec<u8> = (1..=12).collect();
        let mut reqs: Vec<OutageRequirement> = [2, 3, 4, 5].iter().map(|&l| req(l, 2, all.clone())).collect();
        reqs.push(req(11, 1, all.clone()));
        reqs.extend([25, 26].iter().map(|&l| req(l, 2, all.clone())));
        ExperimentConfig {
            case: "rts79".into(),
            modifications: Some("rts79-bottleneck".into()),
            mode: Mode::Proxy,
            proxy_dataset: Some("rts79.proxy".into()),
            scenarios_per_assessment: 3,
            shared_seasonal_chain: false,
            master_seed: 2017,
            workers: 8,
            cost_scale: None,
            sampler: SamplerParams::default(),
            thresholds: ChanceThresholds::default(),
            ce: CeParams::default(),
            rt: RtOptions::default(),
            compare: CompareConfig::default(),
            proxy: ProxyConfig::default(),
            process: ProcessConfig::default(),
            outage_requirements: reqs,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, what: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::parse(what, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::validation("workers", "must be at least 1"));
        }
        if self.scenarios_per_assessment == 0 {
            return Err(Error::validation("scenarios_per_assessment", "must be at least 1"));
        }
        if self.mode == Mode::Proxy && self.proxy_dataset.is_none() {
            return Err(Error::validation("proxy_dataset", "required in proxy mode"));
        }
        if self.compare.n_seeds == 0 || self.compare.bins == 0 {
            return Err(Error::validation("compare", "n_seeds and bins must be positive"));
        }
        self.sampler.validate()?;
        self.thresholds.validate()?;
        self.ce.validate()
    }

    /// Proxy keying: the configured one, else one bit per required line.
    pub fn keying(&self) -> Keying {
        self.proxy.keying.clone().unwrap_or_else(|| Keying::Flat {
            lines: self.outage_requirements.iter().map(|r| r.line_id).collect(),
        })
    }
}

fn is_path(s: &str) -> bool {
    s.contains('/') || s.contains('.')
}

/// Per-month means over the scenarios of an assessment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthSeries {
    pub month: u8,
    /// Real-time operating cost, scaled to the whole month.
    pub rt_cost: f64,
    /// Day-ahead cost, scaled to the whole month.
    pub day_ahead_cost: f64,
    pub reliability: f64,
    #[serde(rename = "shed_MW")]
    pub shed_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub mode: Mode,
    pub schedule: OutageSchedule,
    pub metrics: ScheduleMetrics,
    pub months: Vec<MonthSeries>,
    /// Not serialized, so that written reports are reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl AssessmentReport {
    pub fn months_csv(&self) -> String {
        let mut s = String::from("month,rt_cost,day_ahead_cost,reliability,shed_MW\n");
        for m in &self.months {
            let _ = writeln!(s, "{},{},{},{},{}", m.month, m.rt_cost, m.day_ahead_cost, m.reliability, m.shed_mw);
        }
        s
    }
}

/// Sums over one month of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MonthOutcome {
    rt_cost: f64,
    day_ahead_cost: f64,
    reliability_sum: f64,
    shed_sum: f64,
    hours: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MonthKey {
    seed: u64,
    scenario: usize,
    month: u8,
    out: Vec<u32>,
}

/// A loaded experiment: resolved case, process, optional proxy dataset, a
/// worker pool and the assessment caches.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub case: GridCase,
    pub process: ProcessParams,
    pub proxy: Option<Arc<ProxyDataset>>,
    pub base_dir: PathBuf,
    pool: rayon::ThreadPool,
    scenarios: Mutex<HashMap<(u64, usize), Arc<ScenarioSample>>>,
    months: Mutex<HashMap<MonthKey, MonthOutcome>>,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = ExperimentConfig::parse(&read_to_string(path)?, &path.display().to_string())?;
        Self::new(cfg, path.parent().unwrap_or(Path::new(".")))
    }

    /// Resolves `cfg`; relative paths are taken from `base_dir`. In proxy
    /// mode the dataset must already exist.
    pub fn new(cfg: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        cfg.validate()?;
        let mut case = if is_path(&cfg.case) { load_case(&base_dir.join(&cfg.case))? } else { bundled_case(&cfg.case)? };
        if let Some(m) = &cfg.modifications {
            let mods = if is_path(m) { load_modifications(&base_dir.join(m))? } else { bundled_modifications(m)? };
            case = apply_modifications(&case, &mods)?;
        }
        validate_requirements(&case, &cfg.outage_requirements)?;
        let process = cfg.process.resolve(&case, base_dir)?;
        let proxy = match (cfg.mode, &cfg.proxy_dataset) {
            (Mode::Proxy, Some(p)) => Some(Arc::new(ProxyDataset::read(&base_dir.join(p), &case)?)),
            _ => None,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::validation("workers", e.to_string()))?;
        Ok(Experiment {
            config: cfg,
            case,
            process,
            proxy,
            base_dir: base_dir.to_path_buf(),
            pool,
            scenarios: Mutex::new(HashMap::new()),
            months: Mutex::new(HashMap::new()),
        })
    }

    /// Same experiment in another mode, sharing nothing cached.
    pub fn with_mode(&self, mode: Mode, dataset: Option<Arc<ProxyDataset>>) -> Result<Self> {
        let mut cfg = self.config.clone();
        cfg.mode = mode;
        if mode == Mode::Proxy && dataset.is_none() {
            return Err(Error::validation("proxy_dataset", "required in proxy mode"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::validation("workers", e.to_string()))?;
        Ok(Experiment {
            config: cfg,
            case: self.case.clone(),
            process: self.process.clone(),
            proxy: if mode == Mode::Proxy { dataset } else { None },
            base_dir: self.base_dir.clone(),
            pool,
            scenarios: Mutex::new(HashMap::new()),
            months: Mutex::new(HashMap::new()),
        })
    }

    pub fn reqs(&self) -> &[OutageRequirement] {
        &self.config.outage_requirements
    }

    pub fn root_seed(&self) -> SeedTree {
        SeedTree::new(self.config.master_seed)
    }

    /// Seed of the optimizer's assessments: fixed across iterations, so
    /// every candidate sees the same scenarios.
    pub fn assessment_seed(&self) -> SeedTree {
        self.root_seed().child("assessment")
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn clear_cache(&self) {
        self.scenarios.lock().unwrap().clear();
        self.months.lock().unwrap().clear();
    }

    fn scenario(&self, seed: SeedTree, s: usize) -> Result<Arc<ScenarioSample>> {
        if let Some(hit) = self.scenarios.lock().unwrap().get(&(seed.value(), s)) {
            return Ok(hit.clone());
        }
        let cfg = &self.config;
        let mut rng = seed.child("scenario").index(s as u64).rng();
        let chain = if cfg.shared_seasonal_chain {
            sample_seasonal_chain(&cfg.sampler, &self.process, &mut seed.child("seasonal").rng())
        } else {
            sample_seasonal_chain(&cfg.sampler, &self.process, &mut rng)
        };
        let sample = Arc::new(sample_scenario_with_chain(&self.case, &cfg.sampler, &self.process, &chain, &mut rng)?);
        self.scenarios.lock().unwrap().insert((seed.value(), s), sample.clone());
        Ok(sample)
    }

    fn day_ahead(&self, topology: &Topology, month: u8, sample: &crate::sampler::DaySample, init: &[InitialStatus]) -> Result<UcSolution> {
        match &self.proxy {
            Some(ds) => {
                let key = ds.header.keying.key_of(&self.case, topology)?;
                let q = UcQuery { topology_key: key, month, forecast: sample.forecast.clone() };
                Ok(nn_lookup(ds, &q)?.clone())
            }
            None => solve_uc(&self.case, topology, &sample.forecast, init),
        }
    }

    /// Lines forced out in one hour, drawn for every line so the stream does
    /// not depend on the maintenance topology.
    fn forced(&self, rng: &mut impl Rng) -> Vec<usize> {
        let rate = self.process.forced_outage_rate;
        (0..self.case.n_lines()).filter(|_| rng.random_bool(rate)).collect()
    }

    fn run_month(&self, seed: SeedTree, s: usize, m: &MonthSample, topology: &Topology) -> Result<MonthOutcome> {
        let p = &self.config.sampler;
        let day_weight = HOURS_PER_DAY as f64 / (p.n_rt * p.w_rt) as f64;
        let mut out = MonthOutcome { rt_cost: 0.0, day_ahead_cost: 0.0, reliability_sum: 0.0, shed_sum: 0.0, hours: 0 };
        for (w, window) in m.windows.iter().enumerate() {
            let mut init = vec![InitialStatus::LONG_ON; self.case.n_gens()];
            for (d, day) in window.days.iter().enumerate() {
                let ctx = |h: Option<usize>| {
                    let mut c = format!("scenario {s}, month {}, window {w}, day {d}", m.month);
                    if let Some(h) = h {
                        let _ = write!(c, ", hour {h}");
                    }
                    c
                };
                let uc = self.day_ahead(topology, m.month, day, &init).map_err(|e| e.context(ctx(None)))?;
                out.day_ahead_cost += uc.cost;
                init = uc.final_status();
                for (k, hw) in window.days[d].hour_windows.iter().enumerate() {
                    let mut forced_rng = (self.process.forced_outage_rate > 0.0).then(|| {
                        seed.child("forced").index(s as u64).index(u64::from(m.month)).index((w * 1000 + d) as u64).index(k as u64).rng()
                    });
                    let mut prev: Option<RtDecision> = None;
                    for (i, state) in hw.hours.iter().enumerate() {
                        let hour = hw.start_hour + i;
                        let mut topo_h = topology.clone();
                        if let Some(rng) = forced_rng.as_mut() {
                            for l in self.forced(rng) {
                                topo_h.line_status[l] = false;
                            }
                        }
                        let dec = solve_rt(&self.case, &topo_h, state, &uc, hour, prev.as_ref(), &self.config.rt)
                            .map_err(|e| e.context(ctx(Some(hour))))?;
                        out.reliability_sum += state_reliability(&self.case, &topo_h, state, &dec, &DcChecker);
                        out.shed_sum += dec.total_shed_mw();
                        out.rt_cost += day_weight * rt_operating_cost(&dec);
                        out.hours += 1;
                        prev = Some(dec);
                    }
                }
            }
        }
        let w = scenario_weight(p, m.month);
        out.rt_cost *= w;
        out.day_ahead_cost *= w;
        Ok(out)
    }

    fn month_outcome(&self, seed: SeedTree, s: usize, m: &MonthSample, schedule: &OutageSchedule) -> Result<MonthOutcome> {
        let key = MonthKey { seed: seed.value(), scenario: s, month: m.month, out: schedule.lines_out(self.reqs(), m.month) };
        if let Some(hit) = self.months.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let topology = schedule.topology(&self.case, self.reqs(), m.month);
        let out = self.run_month(seed, s, m, &topology)?;
        self.months.lock().unwrap().insert(key, out);
        Ok(out)
    }

    /// Assesses `schedule` on the scenarios under `seed`.
    pub fn assess(&self, schedule: &OutageSchedule, seed: SeedTree) -> Result<AssessmentReport> {
        if !schedule.is_feasible(self.reqs()) && schedule != &OutageSchedule::empty(self.reqs().len()) {
            return Err(Error::validation("schedule", "violates the outage requirements"));
        }
        let start = Instant::now();
        let cfg = &self.config;
        let n_s = cfg.scenarios_per_assessment;
        let months = usize::from(cfg.sampler.months);
        let outcomes: Vec<MonthOutcome> = self.install(|| {
            let samples = (0..n_s).map(|s| self.scenario(seed, s)).collect::<Result<Vec<_>>>()?;
            (0..n_s * months)
                .into_par_iter()
                .map(|t| self.month_outcome(seed, t / months, &samples[t / months].months[t % months], schedule))
                .collect::<Result<Vec<_>>>()
        })?;

        let peak = self.case.total_peak_load();
        let per_scenario: Vec<ScenarioMetrics> = outcomes
            .chunks(months)
            .map(|ms| {
                let hours: usize = ms.iter().map(|o| o.hours).sum();
                let shed = ms.iter().map(|o| o.shed_sum).sum::<f64>() / hours as f64;
                ScenarioMetrics {
                    mean_reliability: ms.iter().map(|o| o.reliability_sum).sum::<f64>() / hours as f64,
                    mean_shed_mw: shed,
                    mean_shed_frac: if peak > 0.0 { shed / peak } else { 0.0 },
                    total_cost: ms.iter().map(|o| o.rt_cost).sum(),
                }
            })
            .collect();
        let n = n_s as f64;
        let series = (0..months)
            .map(|mi| {
                let col = || (0..n_s).map(|s| &outcomes[s * months + mi]);
                MonthSeries {
                    month: mi as u8 + 1,
                    rt_cost: col().map(|o| o.rt_cost).sum::<f64>() / n,
                    day_ahead_cost: col().map(|o| o.day_ahead_cost).sum::<f64>() / n,
                    reliability: col().map(|o| o.reliability_sum / o.hours as f64).sum::<f64>() / n,
                    shed_mw: col().map(|o| o.shed_sum / o.hours as f64).sum::<f64>() / n,
                }
            })
            .collect();
        Ok(AssessmentReport {
            mode: cfg.mode,
            schedule: schedule.clone(),
            metrics: ScheduleMetrics::from_scenarios(per_scenario, &cfg.thresholds, peak),
            months: series,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Barrier parameters: the configured cost scale, else the expected cost
    /// of the empty schedule under the assessment seed.
    pub fn barrier(&self) -> Result<BarrierParams> {
        let scale = match self.config.cost_scale {
            Some(c) => c,
            None => self.assess(&OutageSchedule::empty(self.reqs().len()), self.assessment_seed())?.metrics.aggregate.expected_cost,
        };
        Ok(BarrierParams::scaled(scale))
    }

    pub fn penalized(&self, report: &AssessmentReport, barrier: &BarrierParams) -> f64 {
        penalized_cost(&report.metrics, &self.config.thresholds, barrier)
    }
}

/// Free-function form of [`Experiment::assess`].
pub fn assess_schedule(exp: &Experiment, schedule: &OutageSchedule, seed: SeedTree) -> Result<AssessmentReport> {
    exp.assess(schedule, seed)
}

/// Summary written next to the optimizer's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub converged: bool,
    pub iterations: usize,
    pub barrier: BarrierParams,
    pub penalized: f64,
    pub assessment: AssessmentReport,
    pub best_sample: OutageSchedule,
    pub best_sample_penalized: f64,
}

/// Runs the cross-entropy search and writes `best_schedule.csv`,
/// `trace.csv`, `p_matrices/iter_NNN.csv` and `report.json` into `out`.
/// Artifacts are written even when the iteration budget runs out; the
/// error is returned afterwards.
pub fn run_optimize(exp: &Experiment, out: &Path) -> Result<OptimizeResult> {
    let cfg = &exp.config;
    let barrier = exp.barrier()?;
    let seed = exp.assessment_seed();
    let mut rng = exp.root_seed().child("optimizer").rng();
    let result = exp.install(|| {
        optimize(exp.reqs(), &cfg.thresholds, &barrier, &cfg.ce, |s| Ok(exp.assess(s, seed)?.metrics), &mut rng)
    });
    let (result, err) = match result {
        Ok(r) => (r, None),
        Err(Error::MaxIterations { iters, best }) => {
            let r = (*best).clone();
            (r, Some(Error::MaxIterations { iters, best }))
        }
        Err(e) => return Err(e),
    };
    write_optimize_artifacts(exp, out, &result, &barrier)?;
    match err {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

fn write_optimize_artifacts(exp: &Experiment, out: &Path, result: &OptimizeResult, barrier: &BarrierParams) -> Result<()> {
    let reqs = exp.reqs();
    let assessment = exp.assess(&result.schedule, exp.assessment_seed())?;
    let report = OptimizeReport {
        converged: result.converged,
        iterations: result.trace.len(),
        barrier: *barrier,
        penalized: exp.penalized(&assessment, barrier),
        assessment,
        best_sample: result.best_sample.schedule.clone(),
        best_sample_penalized: result.best_sample.penalized,
    };
    write_file(&out.join("best_schedule.csv"), result.schedule.to_csv(reqs))?;
    write_file(&out.join("trace.csv"), result.trace_csv())?;
    for (k, p) in result.p_history.iter().enumerate() {
        write_file(&out.join("p_matrices").join(format!("iter_{k:03}.csv")), p.to_csv(reqs))?;
    }
    write_file(&out.join("months.csv"), report.assessment.months_csv())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&out.join("report.json"), json + "\n")
}

/// One assessed schedule in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub schedule_id: String,
    pub seed: usize,
    pub expected_cost: f64,
    pub penalized: f64,
    pub mean_reliability: f64,
    pub mean_shed_frac: f64,
    pub p_reliability_ok: f64,
    pub p_shed_ok: f64,
}

/// Assesses `optimized` and `n_random` uniformly drawn feasible schedules on
/// the same seeds, and writes `compare.csv` (scatter data), `schedules.csv`
/// and one histogram per metric into `out`.
pub fn run_compare(exp: &Experiment, optimized: &OutageSchedule, n_random: usize, out: &Path) -> Result<Vec<CompareRow>> {
    let reqs = exp.reqs();
    let barrier = exp.barrier()?;
    let uniform = CeDistribution::uniform(reqs.len());
    let mut schedules = vec![("opt".to_string(), optimized.clone())];
    for i in 0..n_random {
        let mut rng = exp.root_seed().child("compare").index(i as u64).rng();
        schedules.push((format!("rand-{i:03}"), sample_schedule(&uniform, reqs, &mut rng)));
    }
    let seeds: Vec<SeedTree> = (0..exp.config.compare.n_seeds)
        .map(|k| if k == 0 { exp.assessment_seed() } else { exp.root_seed().child("compare-eval").index(k as u64) })
        .collect();
    let mut rows = Vec::new();
    for (id, s) in &schedules {
        for (k, &seed) in seeds.iter().enumerate() {
            let r = exp.assess(s, seed)?;
            let m = &r.metrics;
            rows.push(CompareRow {
                schedule_id: id.clone(),
                seed: k,
                expected_cost: m.aggregate.expected_cost,
                penalized: exp.penalized(&r, &barrier),
                mean_reliability: m.mean_reliability(),
                mean_shed_frac: m.mean_shed_frac(),
                p_reliability_ok: m.aggregate.p_reliability_ok,
                p_shed_ok: m.aggregate.p_shed_ok,
            });
        }
    }

    let mut csv = String::from("schedule_id,seed,expected_cost,penalized,mean_reliability,mean_shed_frac,p_reliability_ok,p_shed_ok\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.schedule_id, r.seed, r.expected_cost, r.penalized, r.mean_reliability, r.mean_shed_frac, r.p_reliability_ok, r.p_shed_ok
        );
    }
    write_file(&out.join("compare.csv"), csv)?;
    let mut sched = String::from("schedule_id,line_id,months\n");
    for (id, s) in &schedules {
        for (row, r) in s.assignment.iter().zip(reqs) {
            let months: Vec<String> = (1..=12).filter(|&m| row[m - 1]).map(|m| m.to_string()).collect();
            let _ = writeln!(sched, "{id},{},{}", r.line_id, months.join(" "));
        }
    }
    write_file(&out.join("schedules.csv"), sched)?;
    let bins = exp.config.compare.bins;
    for (name, f) in [
        ("penalized", (|r: &CompareRow| r.penalized) as fn(&CompareRow) -> f64),
        ("cost", |r| r.expected_cost),
        ("reliability", |r| r.mean_reliability),
        ("shed", |r| r.mean_shed_frac),
    ] {
        write_file(&out.join(format!("hist_{name}.csv")), histogram(&rows, bins, f))?;
    }
    Ok(rows)
}

/// Equal-width histogram with separate counts for random and optimized rows.
fn histogram(rows: &[CompareRow], bins: usize, f: fn(&CompareRow) -> f64) -> String {
    let vals: Vec<f64> = rows.iter().map(f).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![[0usize; 2]; bins];
    for (r, v) in rows.iter().zip(&vals) {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b][usize::from(r.schedule_id == "opt")] += 1;
    }
    let mut s = String::from("bin_lo,bin_hi,random,optimized\n");
    for (b, c) in counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", lo + b as f64 * width, lo + (b + 1) as f64 * width, c[0], c[1]);
    }
    s
}

/// Builds the proxy dataset described by the config.
pub fn build_proxy(exp: &Experiment) -> Result<ProxyDataset> {
    let p = &exp.config.proxy;
    let params = DatasetParams { keying: exp.config.keying(), n_records: p.n_records, min_bucket: p.min_bucket, distance: p.distance };
    exp.install(|| generate_dataset(&exp.case, &params, &exp.process, exp.root_seed().child("proxy")))
}
