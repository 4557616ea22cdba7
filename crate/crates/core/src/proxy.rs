//! Nearest-neighbour UC proxy: a dataset of exactly solved day-ahead
//! problems, bucketed by outage pattern and searched by forecast distance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_file, Error, Result};
use crate::grid::{GridCase, Topology};
use crate::reliability::{state_reliability, DcChecker};
use crate::rt::{rt_operating_cost, solve_rt, RtDecision, RtOptions};
use crate::seed::SeedTree;
use crate::stochastic::{
    day_of_year, days_in_month, sample_day_ahead, seasonal_step, simulate_day, DayAheadForecast, ProcessParams,
    HOURS_PER_DAY,
};
use crate::uc::{solve_uc, InitialStatus, UcSolution};

pub const FORMAT: &str = "gridsched-proxy";
/// Bumped whenever the distance or the record layout changes.
pub const METRIC_VERSION: u32 = 1;
pub const DEFAULT_MIN_BUCKET: usize = 10;
/// Largest number of outage patterns a dataset may cover.
pub const MAX_TOPOLOGIES: usize = 4096;

/// How an outage pattern maps to a dataset bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Keying {
    /// One bit per candidate line id.
    Flat { lines: Vec<u32> },
    /// Outages confined to one zone at a time: the key is the zone plus a
    /// mask over that zone's lines followed by the shared lines.
    Zonal { zones: Vec<Vec<u32>>, shared: Vec<u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopologyKey {
    pub zone: u32,
    pub mask: u32,
}

impl TopologyKey {
    pub fn packed(self) -> u64 {
        u64::from(self.zone) << 32 | u64::from(self.mask)
    }
}

impl Keying {
    fn groups(&self) -> Vec<Vec<u32>> {
        match self {
            Keying::Flat { lines } => vec![lines.clone()],
            Keying::Zonal { zones, shared } => zones.iter().map(|z| z.iter().chain(shared).copied().collect()).collect(),
        }
    }

    /// Every key the dataset must cover, in canonical order.
    pub fn all_keys(&self) -> Result<Vec<TopologyKey>> {
        let groups = self.groups();
        let zone_len = |z: usize| match self {
            Keying::Flat { .. } => 0,
            Keying::Zonal { zones, .. } => zones[z].len(),
        };
        let mut keys = Vec::new();
        for (z, g) in groups.iter().enumerate() {
            if g.len() > 20 {
                return Err(Error::Capacity(format!("{} outage candidates in one key group", g.len())));
            }
            for mask in 0..1u32 << g.len() {
                // Patterns with no zone outage belong to zone 0 only.
                if z > 0 && mask & ((1 << zone_len(z)) - 1) == 0 {
                    continue;
                }
                keys.push(TopologyKey { zone: z as u32, mask });
                if keys.len() > MAX_TOPOLOGIES {
                    return Err(Error::Capacity(format!("more than {MAX_TOPOLOGIES} outage patterns")));
                }
            }
        }
        Ok(keys)
    }

    /// Key of a topology; lines outside the candidate set must be in service.
    pub fn key_of(&self, case: &GridCase, topology: &Topology) -> Result<TopologyKey> {
        let out: Vec<u32> = topology.out_of_service().into_iter().map(|l| case.lines[l].id).collect();
        let groups = self.groups();
        let mut found = None;
        for (z, g) in groups.iter().enumerate() {
            if out.iter().all(|id| g.contains(id)) {
                let mask = g.iter().enumerate().filter(|(_, id)| out.contains(id)).map(|(i, _)| 1u32 << i).sum();
                found = Some(TopologyKey { zone: z as u32, mask });
                break;
            }
        }
        found.ok_or_else(|| Error::validation("topology", format!("outages {out:?} are not covered by the proxy keying")))
    }

    pub fn topology_of(&self, case: &GridCase, key: TopologyKey) -> Result<Topology> {
        let group = &self.groups()[key.zone as usize];
        let mut t = Topology::all_in_service(case.n_lines());
        for (i, id) in group.iter().enumerate() {
            if key.mask >> i & 1 == 1 {
                let l = case.line_index(*id).ok_or_else(|| Error::validation("proxy.keying", format!("unknown line {id}")))?;
                t.line_status[l] = false;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// System-wide hourly wind and load, normalized by installed capacity
    /// and peak load.
    #[default]
    System,
    /// Every wind farm and bus separately, each normalized by its own
    /// capacity or peak.
    PerBus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcQuery {
    pub topology_key: TopologyKey,
    pub month: u8,
    pub forecast: DayAheadForecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyRecord {
    pub query: UcQuery,
    pub solution: UcSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub metric_version: u32,
    pub case_hash: String,
    pub keying: Keying,
    pub distance: DistanceMode,
    pub min_bucket: usize,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyDataset {
    pub header: DatasetHeader,
    pub records: Vec<ProxyRecord>,
    index: BTreeMap<TopologyKey, Vec<usize>>,
    features: Vec<Vec<f64>>,
    scale: Scale,
}

/// Normalizers of the distance features.
#[derive(Debug, Clone, PartialEq)]
struct Scale {
    wind: Vec<f64>,
    load: Vec<f64>,
    wind_total: f64,
    load_total: f64,
}

impl Scale {
    fn new(case: &GridCase) -> Self {
        let nz = |v: f64| if v > 0.0 { v } else { 1.0 };
        Scale {
            wind: case.wind_generators.iter().map(|w| nz(w.capacity_mw)).collect(),
            load: case.buses.iter().map(|b| nz(b.peak_load_mw)).collect(),
            wind_total: nz(case.total_wind_capacity()),
            load_total: nz(case.total_peak_load()),
        }
    }

    fn features(&self, mode: DistanceMode, f: &DayAheadForecast) -> Vec<f64> {
        match mode {
            DistanceMode::System => {
                let (w, d) = f.system_totals();
                w.iter().map(|v| v / self.wind_total).chain(d.iter().map(|v| v / self.load_total)).collect()
            }
            DistanceMode::PerBus => f
                .wind
                .iter()
                .zip(&self.wind)
                .chain(f.load.iter().zip(&self.load))
                .flat_map(|(row, s)| row.iter().map(move |v| v / s))
                .collect(),
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance between two queries' forecasts on `case`.
pub fn distance(case: &GridCase, mode: DistanceMode, a: &UcQuery, b: &UcQuery) -> f64 {
    let s = Scale::new(case);
    euclid(&s.features(mode, &a.forecast), &s.features(mode, &b.forecast))
}

impl ProxyDataset {
    pub fn new(case: &GridCase, header: DatasetHeader, records: Vec<ProxyRecord>) -> Self {
        let scale = Scale::new(case);
        let mut index: BTreeMap<TopologyKey, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            index.entry(r.query.topology_key).or_default().push(i);
        }
        let features = records.iter().map(|r| scale.features(header.distance, &r.query.forecast)).collect();
        ProxyDataset { header, records, index, features, scale }
    }

    pub fn bucket_sizes(&self) -> BTreeMap<TopologyKey, usize> {
        self.index.iter().map(|(k, v)| (*k, v.len())).collect()
    }

    /// Index of the nearest record in the query's bucket; ties go to the
    /// earliest record.
    pub fn nearest(&self, q: &UcQuery) -> Result<(usize, f64)> {
        let bucket = self
            .index
            .get(&q.topology_key)
            .filter(|b| !b.is_empty())
            .ok_or(Error::MissingTopology { key: q.topology_key.packed() })?;
        let fq = self.scale.features(self.header.distance, &q.forecast);
        let mut best = (bucket[0], f64::INFINITY);
        for &i in bucket {
            let d = euclid(&fq, &self.features[i]);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        write_file(path, out)
    }

    /// Loads a dataset, refusing one built for a different case.
    pub fn read(path: &Path, case: &GridCase) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut lines = text.lines();
        let header: DatasetHeader = serde_json::from_str(lines.next().unwrap_or(""))
            .map_err(|e| Error::parse(format!("{} header", path.display()), e))?;
        if header.format != FORMAT || header.metric_version != METRIC_VERSION {
            return Err(Error::validation(
                path.display().to_string(),
                format!("unsupported dataset format {} v{}", header.format, header.metric_version),
            ));
        }
        let found = case.content_hash();
        if header.case_hash != found {
            return Err(Error::CaseMismatch { expected: header.case_hash, found });
        }
        let records = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{} record {i}", path.display()), e)))
            .collect::<Result<Vec<ProxyRecord>>>()?;
        if records.len() != header.records {
            return Err(Error::validation(
                path.display().to_string(),
                format!("header announces {} records, file has {}", header.records, records.len()),
            ));
        }
        Ok(Self::new(case, header, records))
    }
}

/// Retrieved solution for `q`; never crosses topology buckets.
pub fn nn_lookup<'a>(ds: &'a ProxyDataset, q: &UcQuery) -> Result<&'a UcSolution> {
    ds.nearest(q).map(|(i, _)| &ds.records[i].solution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub keying: Keying,
    pub n_records: usize,
    pub min_bucket: usize,
    pub distance: DistanceMode,
}

/// Draws a training input: month uniformly, then the seasonal factor, a day
/// of that month and its forecast; the topology is drawn independently.
pub fn sample_query(
    case: &GridCase,
    keys: &[TopologyKey],
    process: &ProcessParams,
    rng: &mut impl Rng,
) -> (UcQuery, usize) {
    let month: u8 = rng.random_range(1..=12);
    let prev = process.monthly_profile(if month == 1 { 12 } else { month - 1 });
    let j = seasonal_step(prev, month, process, rng);
    let day = rng.random_range(1..=days_in_month(month));
    let doy = day_of_year(month, day);
    let forecast = sample_day_ahead(case, doy, j, process, rng);
    let key = keys[rng.random_range(0..keys.len())];
    (UcQuery { topology_key: key, month, forecast }, doy)
}

/// Moves records from the fullest buckets into under-filled ones until
/// every key holds at least `min_bucket` records.
fn rebalance(assigned: &mut [usize], n_keys: usize, min_bucket: usize) {
    let mut counts = vec![0usize; n_keys];
    for &k in assigned.iter() {
        counts[k] += 1;
    }
    while let Some(short) = (0..n_keys).find(|&k| counts[k] < min_bucket) {
        // Fullest bucket, lowest key on ties; its last record moves.
        let full = (0..n_keys).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
        let i = assigned.iter().rposition(|&k| k == full).unwrap();
        assigned[i] = short;
        counts[full] -= 1;
        counts[short] += 1;
    }
}

/// Builds a dataset of exactly solved UC problems. Records are generated
/// in parallel, each from its own stream under `seed`.
pub fn generate_dataset(
    case: &GridCase,
    params: &DatasetParams,
    process: &ProcessParams,
    seed: SeedTree,
) -> Result<ProxyDataset> {
    let keys = params.keying.all_keys()?;
    if params.n_records < keys.len() * params.min_bucket {
        return Err(Error::validation(
            "proxy.n_records",
            format!("{} records cannot fill {} buckets of {}", params.n_records, keys.len(), params.min_bucket),
        ));
    }
    let mut drafts: Vec<(UcQuery, usize)> =
        (0..params.n_records).map(|i| sample_query(case, &keys, process, &mut seed.index(i as u64).rng())).collect();
    let mut assigned: Vec<usize> =
        drafts.iter().map(|(q, _)| keys.iter().position(|k| *k == q.topology_key).unwrap()).collect();
    rebalance(&mut assigned, keys.len(), params.min_bucket);
    for (d, &k) in drafts.iter_mut().zip(&assigned) {
        d.0.topology_key = keys[k];
    }
    let records = drafts
        .into_par_iter()
        .enumerate()
        .map(|(i, (query, _))| {
            let topo = params.keying.topology_of(case, query.topology_key)?;
            let init = vec![InitialStatus::LONG_ON; case.n_gens()];
            let solution = solve_uc(case, &topo, &query.forecast, &init).map_err(|e| e.context(format!("record {i}")))?;
            Ok(ProxyRecord { query, solution })
        })
        .collect::<Result<Vec<_>>>()?;
    let header = DatasetHeader {
        format: FORMAT.into(),
        metric_version: METRIC_VERSION,
        case_hash: case.content_hash(),
        keying: params.keying.clone(),
        distance: params.distance,
        min_bucket: params.min_bucket,
        records: records.len(),
    };
    Ok(ProxyDataset::new(case, header, records))
}

/// Downstream outcome of one day under a given day-ahead baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayOutcome {
    pub day_ahead_cost: f64,
    pub rt_cost: f64,
    pub shed_mw: f64,
    pub reliability: f64,
}

/// Runs the real-time chain over `hours` starting at `start_hour`.
pub fn run_rt_window(
    case: &GridCase,
    topology: &Topology,
    baseline: &UcSolution,
    start_hour: usize,
    hours: &[crate::stochastic::HourlyRealization],
    opts: &RtOptions,
) -> Result<Vec<(RtDecision, f64)>> {
    let mut out: Vec<(RtDecision, f64)> = Vec::with_capacity(hours.len());
    for (k, state) in hours.iter().enumerate() {
        let prev = out.last().map(|(d, _)| d);
        let d = solve_rt(case, topology, state, baseline, start_hour + k, prev, opts)?;
        let r = state_reliability(case, topology, state, &d, &DcChecker);
        out.push((d, r));
    }
    Ok(out)
}

fn day_outcome(
    case: &GridCase,
    topology: &Topology,
    baseline: &UcSolution,
    hours: &[crate::stochastic::HourlyRealization],
    opts: &RtOptions,
) -> Result<DayOutcome> {
    let chain = run_rt_window(case, topology, baseline, 0, hours, opts)?;
    let n = chain.len().max(1) as f64;
    Ok(DayOutcome {
        day_ahead_cost: baseline.cost,
        rt_cost: chain.iter().map(|(d, _)| rt_operating_cost(d)).sum(),
        shed_mw: chain.iter().map(|(d, _)| d.total_shed_mw()).sum::<f64>() / n,
        reliability: chain.iter().map(|(_, r)| r).sum::<f64>() / n,
    })
}

pub const REPORT_METRICS: [&str; 4] = ["day_ahead_cost", "shed_mw", "rt_cost", "reliability"];

/// Gap statistics of one metric in one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub month: u8,
    pub metric: String,
    pub n: usize,
    pub mean_exact: f64,
    pub mean_proxy: f64,
    /// Mean of proxy − exact.
    pub mean_gap: f64,
    pub sd_gap: f64,
    /// Mean of |proxy − exact| / max(|exact|, 1).
    pub mean_abs_rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub rows: Vec<GapRow>,
    pub exact_seconds: f64,
    pub proxy_seconds: f64,
}

impl ProxyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("month,metric,n,mean_exact,mean_proxy,mean_gap,sd_gap,mean_abs_rel_gap\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.month, r.metric, r.n, r.mean_exact, r.mean_proxy, r.mean_gap, r.sd_gap, r.mean_abs_rel_gap
            );
        }
        s
    }

    /// Largest mean relative gap of `metric` over the months.
    pub fn band(&self, metric: &str) -> f64 {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| r.mean_abs_rel_gap).fold(0.0, f64::max)
    }
}

/// Compares proxy and exact day-ahead baselines on `n_test` fresh queries,
/// each followed by the same simulated real-time day.
pub fn evaluate_proxy(
    case: &GridCase,
    ds: &ProxyDataset,
    process: &ProcessParams,
    n_test: usize,
    seed: SeedTree,
) -> Result<ProxyReport> {
    let keys: Vec<TopologyKey> = ds.index.keys().copied().collect();
    let opts = RtOptions::default();
    let trials = (0..n_test)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.index(i as u64).rng();
            let (q, _) = sample_query(case, &keys, process, &mut rng);
            let topo = ds.header.keying.topology_of(case, q.topology_key)?;
            let hours = simulate_day(case, &q.forecast, HOURS_PER_DAY, process, &mut rng);
            let t = std::time::Instant::now();
            let exact = solve_uc(case, &topo, &q.forecast, &vec![InitialStatus::LONG_ON; case.n_gens()])?;
            let exact_s = t.elapsed().as_secs_f64();
            let t = std::time::Instant::now();
            let proxy = nn_lookup(ds, &q)?;
            let proxy_s = t.elapsed().as_secs_f64();
            let e = day_outcome(case, &topo, &exact, &hours, &opts)?;
            let p = day_outcome(case, &topo, proxy, &hours, &opts)?;
            Ok((q.month, e, p, exact_s, proxy_s))
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |o: &DayOutcome, m: &str| match m {
        "day_ahead_cost" => o.day_ahead_cost,
        "shed_mw" => o.shed_mw,
        "rt_cost" => o.rt_cost,
        _ => o.reliability,
    };
    let mut rows = Vec::new();
    for month in 1..=12u8 {
        let here: Vec<_> = trials.iter().filter(|t| t.0 == month).collect();
        if here.is_empty() {
            continue;
        }
        for metric in REPORT_METRICS {
            let n = here.len() as f64;
            let ex: Vec<f64> = here.iter().map(|t| pick(&t.1, metric)).collect();
            let px: Vec<f64> = here.iter().map(|t| pick(&t.2, metric)).collect();
            let gaps: Vec<f64> = px.iter().zip(&ex).map(|(p, e)| p - e).collect();
            let mean_gap = gaps.iter().sum::<f64>() / n;
            let sd_gap = if here.len() > 1 {
                (gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            rows.push(GapRow {
                month,
                metric: metric.into(),
                n: here.len(),
                mean_exact: ex.iter().sum::<f64>() / n,
                mean_proxy: px.iter().sum::<f64>() / n,
                mean_gap,
                sd_gap,
                mean_abs_rel_gap: gaps.iter().zip(&ex).map(|(g, e)| g.abs() / e.abs().max(1.0)).sum::<f64>() / n,
            });
        }
    }
    Ok(ProxyReport {
        rows,
        exact_seconds: trials.iter().map(|t| t.3).sum(),
        proxy_seconds: trials.iter().map(|t| t.4).sum(),
    })
}
