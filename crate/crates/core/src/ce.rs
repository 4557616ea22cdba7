//! Cross-entropy search over outage schedules. A product distribution
//! `p[l][m]` over line/month pairs is sampled row by row, so every sampled
//! schedule is feasible by construction; the distribution then moves to the
//! mean of the cheapest `ρ` fraction.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridCase, Topology};
use crate::reliability::{ChanceThresholds, ScheduleMetrics};

pub const MONTHS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageRequirement {
    pub line_id: u32,
    /// Outages to schedule, one month each.
    pub count: usize,
    pub allowed_months: Vec<u8>,
}

impl OutageRequirement {
    /// Month combinations of size `count` within the allowed months, in
    /// lexicographic order.
    pub fn combos(&self) -> Vec<Vec<u8>> {
        let mut months = self.allowed_months.clone();
        months.sort_unstable();
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(self.count);
        fn rec(months: &[u8], k: usize, start: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..months.len() {
                cur.push(months[i]);
                rec(months, k, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(&months, self.count, 0, &mut cur, &mut out);
        out
    }
}

pub fn validate_requirements(case: &GridCase, reqs: &[OutageRequirement]) -> Result<()> {
    for (i, r) in reqs.iter().enumerate() {
        let path = format!("outage_requirements[{i}]");
        if case.line_index(r.line_id).is_none() {
            return Err(Error::validation(path, format!("unknown line {}", r.line_id)));
        }
        if !(1..=2).contains(&r.count) {
            return Err(Error::validation(path, "count must be 1 or 2"));
        }
        let mut m = r.allowed_months.clone();
        m.sort_unstable();
        m.dedup();
        if m.len() != r.allowed_months.len() || m.iter().any(|&x| !(1..=12).contains(&x)) {
            return Err(Error::validation(path, "allowed_months must be distinct months in 1..=12"));
        }
        if r.count > m.len() {
            return Err(Error::validation(path, "more outages than allowed months"));
        }
        if reqs[..i].iter().any(|o| o.line_id == r.line_id) {
            return Err(Error::validation(path, format!("line {} listed twice", r.line_id)));
        }
    }
    Ok(())
}

/// `assignment[l][m]` is true when requirement `l`'s line is out in month `m + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutageSchedule {
    pub assignment: Vec<[bool; MONTHS]>,
}

impl OutageSchedule {
    pub fn empty(rows: usize) -> Self {
        OutageSchedule { assignment: vec![[false; MONTHS]; rows] }
    }

    pub fn from_combos(combos: &[Vec<u8>]) -> Self {
        let mut s = Self::empty(combos.len());
        for (row, c) in s.assignment.iter_mut().zip(combos) {
            for &m in c {
                row[usize::from(m) - 1] = true;
            }
        }
        s
    }

    /// Whether every row holds exactly its count of outages, all inside the
    /// allowed months.
    pub fn is_feasible(&self, reqs: &[OutageRequirement]) -> bool {
        self.assignment.len() == reqs.len()
            && self.assignment.iter().zip(reqs).all(|(row, r)| {
                let on: Vec<u8> = (1..=12u8).filter(|&m| row[usize::from(m) - 1]).collect();
                on.len() == r.count && on.iter().all(|m| r.allowed_months.contains(m))
            })
    }

    /// Line ids out of service in `month`.
    pub fn lines_out(&self, reqs: &[OutageRequirement], month: u8) -> Vec<u32> {
        let m = usize::from(month) - 1;
        self.assignment.iter().zip(reqs).filter(|(row, _)| row[m]).map(|(_, r)| r.line_id).collect()
    }

    /// Maintenance topology of `month`.
    pub fn topology(&self, case: &GridCase, reqs: &[OutageRequirement], month: u8) -> Topology {
        let mut t = Topology::all_in_service(case.n_lines());
        for id in self.lines_out(reqs, month) {
            t.line_status[case.line_index(id).expect("requirements validated")] = false;
        }
        t
    }

    /// |L|×12 matrix with the line id in the first column.
    pub fn to_csv(&self, reqs: &[OutageRequirement]) -> String {
        let mut s = String::from("line_id");
        for m in 1..=MONTHS {
            let _ = write!(s, ",m{m}");
        }
        s.push('\n');
        for (row, r) in self.assignment.iter().zip(reqs) {
            s.push_str(&r.line_id.to_string());
            for &v in row {
                s.push_str(if v { ",1" } else { ",0" });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, reqs: &[OutageRequirement]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut s = Self::empty(reqs.len());
        let mut seen = vec![false; reqs.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse("schedule", e))?;
            if rec.len() != MONTHS + 1 {
                return Err(Error::parse("schedule", format!("expected {} columns, found {}", MONTHS + 1, rec.len())));
            }
            let id: u32 = rec[0].trim().parse().map_err(|e| Error::parse("schedule line id", e))?;
            let row = reqs
                .iter()
                .position(|r| r.line_id == id)
                .ok_or_else(|| Error::parse("schedule", format!("line {id} has no outage requirement")))?;
            for m in 0..MONTHS {
                s.assignment[row][m] = match rec[m + 1].trim() {
                    "0" => false,
                    "1" => true,
                    v => return Err(Error::parse("schedule", format!("entry {v:?} is not 0 or 1"))),
                };
            }
            seen[row] = true;
        }
        if let Some(row) = seen.iter().position(|s| !s) {
            return Err(Error::parse("schedule", format!("missing row for line {}", reqs[row].line_id)));
        }
        if !s.is_feasible(reqs) {
            return Err(Error::validation("schedule", "violates the outage requirements"));
        }
        Ok(s)
    }
}

/// Every feasible schedule, rows varying fastest in the last requirement.
pub fn enumerate_schedules(reqs: &[OutageRequirement]) -> Vec<OutageSchedule> {
    let combos: Vec<Vec<Vec<u8>>> = reqs.iter().map(|r| r.combos()).collect();
    let mut out = vec![Vec::<Vec<u8>>::new()];
    for row in &combos {
        out = out.into_iter().flat_map(|prefix| row.iter().map(move |c| [prefix.clone(), vec![c.clone()]].concat())).collect();
    }
    out.iter().map(|c| OutageSchedule::from_combos(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeDistribution {
    pub p: Vec<[f64; MONTHS]>,
}

impl CeDistribution {
    pub fn uniform(rows: usize) -> Self {
        CeDistribution { p: vec![[0.5; MONTHS]; rows] }
    }

    pub fn to_csv(&self, reqs: &[OutageRequirement]) -> String {
        let mut s = String::from("line_id");
        for m in 1..=MONTHS {
            let _ = write!(s, ",m{m}");
        }
        s.push('\n');
        for (row, r) in self.p.iter().zip(reqs) {
            s.push_str(&r.line_id.to_string());
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    fn combo_weight(&self, row: usize, combo: &[u8]) -> f64 {
        combo.iter().map(|&m| self.p[row][usize::from(m) - 1]).product()
    }

    /// Most likely combination of each row; ties go to the earliest.
    pub fn argmax(&self, reqs: &[OutageRequirement]) -> OutageSchedule {
        let combos: Vec<Vec<u8>> = reqs
            .iter()
            .enumerate()
            .map(|(l, r)| {
                let mut best: Option<(Vec<u8>, f64)> = None;
                for c in r.combos() {
                    let w = self.combo_weight(l, &c);
                    if best.as_ref().is_none_or(|(_, bw)| w > *bw) {
                        best = Some((c, w));
                    }
                }
                best.expect("requirement has a combination").0
            })
            .collect();
        OutageSchedule::from_combos(&combos)
    }
}

/// Draws one row's month combination with probability proportional to the
/// product of its entries.
pub fn sample_row(dist: &CeDistribution, row: usize, req: &OutageRequirement, rng: &mut impl Rng) -> Result<Vec<u8>> {
    let combos = req.combos();
    let weights: Vec<f64> = combos.iter().map(|c| dist.combo_weight(row, c)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDistribution { row });
    }
    let mut u = rng.random::<f64>() * total;
    for (c, w) in combos.iter().zip(&weights) {
        if u < *w {
            return Ok(c.clone());
        }
        u -= w;
    }
    // Rounding left u at the top edge: take the last positive-weight combo.
    let last = weights.iter().rposition(|&w| w > 0.0).expect("total > 0");
    Ok(combos[last].clone())
}

/// Samples a feasible schedule. A row whose combinations all have zero
/// weight falls back to a uniform draw (logged).
pub fn sample_schedule(dist: &CeDistribution, reqs: &[OutageRequirement], rng: &mut impl Rng) -> OutageSchedule {
    let combos: Vec<Vec<u8>> = reqs
        .iter()
        .enumerate()
        .map(|(l, r)| {
            sample_row(dist, l, r, rng).unwrap_or_else(|e| {
                log::warn!("{e}; sampling line {} uniformly", r.line_id);
                let all = r.combos();
                all[rng.random_range(0..all.len())].clone()
            })
        })
        .collect();
    OutageSchedule::from_combos(&combos)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierParams {
    pub kappa: f64,
    pub lambda: f64,
}

impl BarrierParams {
    /// κ = 10·scale, λ = 100·κ.
    pub fn scaled(cost_scale: f64) -> Self {
        let kappa = 10.0 * cost_scale.abs().max(1.0);
        BarrierParams { kappa, lambda: 100.0 * kappa }
    }

    pub fn barrier(&self, x: f64) -> f64 {
        self.kappa * x + self.lambda * x * x
    }
}

/// Expected cost plus barrier penalties on the chance-constraint shortfalls.
pub fn penalized_cost(metrics: &ScheduleMetrics, thr: &ChanceThresholds, barrier: &BarrierParams) -> f64 {
    let a = &metrics.aggregate;
    let r_gap = ((1.0 - thr.alpha_r) - a.p_reliability_ok).max(0.0);
    let ls_gap = ((1.0 - thr.alpha_shed) - a.p_shed_ok).max(0.0);
    let mut cost = a.expected_cost;
    if r_gap > 0.0 {
        cost += barrier.barrier(r_gap);
    }
    if ls_gap > 0.0 {
        cost += barrier.barrier(ls_gap);
    }
    cost
}

/// ⌈ρ·N⌉, guarding against products like 0.2·10 landing just above an integer.
pub fn elite_size(rho: f64, n: usize) -> usize {
    (((rho * n as f64) - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Indices of the elite: the ⌈ρ·N⌉ lowest costs, ties by sample index.
pub fn elite_indices(costs: &[f64], rho: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    order.truncate(elite_size(rho, costs.len()));
    order
}

/// Elite mean of the sampled assignment matrices, blended with the old
/// distribution by `smoothing` (1 = replace).
pub fn update_distribution(
    dist: &CeDistribution,
    samples: &[OutageSchedule],
    costs: &[f64],
    rho: f64,
    smoothing: f64,
) -> CeDistribution {
    assert_eq!(samples.len(), costs.len());
    let elite = elite_indices(costs, rho);
    let k = elite.len() as f64;
    let mut p = vec![[0.0; MONTHS]; dist.p.len()];
    for &i in &elite {
        for (row, srow) in p.iter_mut().zip(&samples[i].assignment) {
            for m in 0..MONTHS {
                if srow[m] {
                    row[m] += 1.0;
                }
            }
        }
    }
    for (row, old) in p.iter_mut().zip(&dist.p) {
        for m in 0..MONTHS {
            let mean = row[m] / k;
            row[m] = if smoothing == 1.0 { mean } else { smoothing * mean + (1.0 - smoothing) * old[m] };
        }
    }
    CeDistribution { p }
}

/// Σ binary entropies of the entries, in nats.
pub fn entropy(dist: &CeDistribution) -> f64 {
    let h = |p: f64| {
        let t = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
        t(p) + t(1.0 - p)
    };
    dist.p.iter().flatten().map(|&p| h(p)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeParams {
    pub n_samples: usize,
    pub rho: f64,
    /// Stop once the entropy falls below this; `None` means 0.01·|L| nats.
    pub eps_entropy: Option<f64>,
    pub max_iters: usize,
    pub smoothing: f64,
}

impl Default for CeParams {
    fn default() -> Self {
        CeParams { n_samples: 75, rho: 0.15, eps_entropy: None, max_iters: 50, smoothing: 1.0 }
    }
}

impl CeParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.max_iters == 0 {
            return Err(Error::validation("ce", "n_samples and max_iters must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::validation("ce.rho", "must lie in (0, 1]"));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(Error::validation("ce.smoothing", "must lie in (0, 1]"));
        }
        if self.eps_entropy.is_some_and(|e| e.is_nan() || e < 0.0) {
            return Err(Error::validation("ce.eps_entropy", "must be non-negative"));
        }
        Ok(())
    }

    pub fn eps_for(&self, rows: usize) -> f64 {
        self.eps_entropy.unwrap_or(0.01 * rows as f64)
    }
}

/// Lower quartile, median and upper quartile (linear interpolation).
pub fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |f: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = f * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    [q(0.25), q(0.5), q(0.75)]
}

/// One assessed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub schedule: OutageSchedule,
    pub metrics: ScheduleMetrics,
    pub penalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub elite_size: usize,
    /// Quartiles over the elite of the penalized cost, expected cost, mean
    /// reliability and mean shed fraction.
    pub penalized: [f64; 3],
    pub cost: [f64; 3],
    pub reliability: [f64; 3],
    pub shed_frac: [f64; 3],
    /// Entropy after the update.
    pub entropy: f64,
    pub best_penalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// Most likely schedule of the final distribution.
    pub schedule: OutageSchedule,
    /// Cheapest sample seen over the whole run.
    pub best_sample: Scored,
    pub trace: Vec<IterationStats>,
    /// Distribution after each iteration, the initial one first.
    pub p_history: Vec<CeDistribution>,
    pub converged: bool,
}

impl OptimizeResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,elite_size");
        for q in ["penalized", "cost", "reliability", "shed_frac"] {
            let _ = write!(s, ",{q}_q1,{q}_median,{q}_q3");
        }
        s.push_str(",entropy,best_penalized\n");
        for t in &self.trace {
            let _ = write!(s, "{},{}", t.iteration, t.elite_size);
            for q in [t.penalized, t.cost, t.reliability, t.shed_frac] {
                let _ = write!(s, ",{},{},{}", q[0], q[1], q[2]);
            }
            let _ = writeln!(s, ",{},{}", t.entropy, t.best_penalized);
        }
        s
    }
}

/// Runs the cross-entropy loop. `assess` is called from a parallel pool;
/// samples are drawn sequentially from `rng` and results are reduced in
/// sample order, so the run is reproducible for a deterministic `assess`.
pub fn optimize<F>(
    reqs: &[OutageRequirement],
    thr: &ChanceThresholds,
    barrier: &BarrierParams,
    params: &CeParams,
    assess: F,
    rng: &mut impl Rng,
) -> Result<OptimizeResult>
where
    F: Fn(&OutageSchedule) -> Result<ScheduleMetrics> + Sync,
{
    params.validate()?;
    let eps = params.eps_for(reqs.len());
    let mut dist = CeDistribution::uniform(reqs.len());
    let mut p_history = vec![dist.clone()];
    let mut trace = Vec::new();
    let mut best: Option<Scored> = None;

    for iteration in 1..=params.max_iters {
        let samples: Vec<OutageSchedule> = (0..params.n_samples).map(|_| sample_schedule(&dist, reqs, rng)).collect();
        let scored = samples
            .par_iter()
            .map(|s| {
                let metrics = assess(s)?;
                let penalized = penalized_cost(&metrics, thr, barrier);
                Ok(Scored { schedule: s.clone(), metrics, penalized })
            })
            .collect::<Result<Vec<_>>>()?;
        let costs: Vec<f64> = scored.iter().map(|s| s.penalized).collect();
        for s in &scored {
            if best.as_ref().is_none_or(|b| s.penalized < b.penalized) {
                best = Some(s.clone());
            }
        }
        let elite = elite_indices(&costs, params.rho);
        dist = update_distribution(&dist, &samples, &costs, params.rho, params.smoothing);
        let pick = |f: &dyn Fn(&Scored) -> f64| quartiles(&elite.iter().map(|&i| f(&scored[i])).collect::<Vec<_>>());
        let h = entropy(&dist);
        trace.push(IterationStats {
            iteration,
            elite_size: elite.len(),
            penalized: pick(&|s| s.penalized),
            cost: pick(&|s| s.metrics.aggregate.expected_cost),
            reliability: pick(&|s| s.metrics.mean_reliability()),
            shed_frac: pick(&|s| s.metrics.mean_shed_frac()),
            entropy: h,
            best_penalized: best.as_ref().map_or(f64::NAN, |b| b.penalized),
        });
        p_history.push(dist.clone());
        log::info!("ce iteration {iteration}: entropy {h:.4}, elite median {:.2}", trace.last().unwrap().penalized[1]);
        if h < eps {
            return Ok(OptimizeResult {
                schedule: dist.argmax(reqs),
                best_sample: best.expect("at least one sample"),
                trace,
                p_history,
                converged: true,
            });
        }
    }
    let result = OptimizeResult {
        schedule: dist.argmax(reqs),
        best_sample: best.expect("at least one sample"),
        trace,
        p_history,
        converged: false,
    };
    Err(Error::MaxIterations { iters: params.max_iters, best: Box::new(result) })
}
