//! N-1 screening, the per-state reliability metric and empirical
//! chance-constraint evaluation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bus_components, GridCase, Topology};
use crate::rt::RtDecision;
use crate::stochastic::HourlyRealization;

/// Injections below this magnitude (MW) count as zero when deciding
/// whether an island carries load or generation.
const ISLAND_TOL: f64 = 1e-6;
const FLOW_TOL: f64 = 1e-6;

/// Loss of one in-service line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    /// Position of the line in the case.
    pub line: usize,
    pub line_id: u32,
}

/// One contingency per in-service line, in line-id order.
pub fn contingency_list(case: &GridCase, topology: &Topology) -> Vec<Contingency> {
    let mut out: Vec<Contingency> = (0..case.n_lines())
        .filter(|&l| topology.in_service(l))
        .map(|l| Contingency { line: l, line_id: case.lines[l].id })
        .collect();
    out.sort_by_key(|c| c.line_id);
    out
}

/// Decides whether the network can operate after losing a line.
pub trait FeasibilityChecker: Sync {
    /// `pre` is the topology before the contingency, `injections` the fixed
    /// net injection per bus (MW).
    fn feasible(&self, case: &GridCase, pre: &Topology, outage: usize, injections: &[f64]) -> bool;
}

/// DC post-contingency check at fixed injections. With injections fixed
/// the DC flow of each connected component is unique, so feasibility
/// reduces to solving the reduced susceptance system and checking the
/// line limits. Separating any bus with non-zero injection from the rest of
/// its component counts as infeasible.
#[derive(Debug, Clone, Copy, Default)]
pub struct DcChecker;

impl FeasibilityChecker for DcChecker {
    fn feasible(&self, case: &GridCase, pre: &Topology, outage: usize, injections: &[f64]) -> bool {
        let mut post = pre.clone();
        post.line_status[outage] = false;
        let before = bus_components(case, pre);
        let after = bus_components(case, &post);
        let (f, t) = case.line_endpoints()[outage];
        if after[f] != after[t] {
            // The outage split a component. The side holding a reference bus
            // (or, failing that, the component's first bus) stays the grid;
            // the other side is an island and must carry no power.
            let refs = case.reference_positions();
            let anchor = refs
                .iter()
                .copied()
                .find(|&r| before[r] == before[f])
                .unwrap_or_else(|| (0..case.n_buses()).find(|&b| before[b] == before[f]).unwrap());
            let island = if after[anchor] == after[f] { after[t] } else { after[f] };
            if (0..case.n_buses()).any(|b| after[b] == island && injections[b].abs() > ISLAND_TOL) {
                return false;
            }
        }
        match dc_flows(case, &post, injections) {
            Some(flows) => case
                .lines
                .iter()
                .enumerate()
                .all(|(l, line)| flows[l].abs() <= line.flow_limit_mw * (1.0 + 1e-9) + FLOW_TOL),
            None => false,
        }
    }
}

/// Line flows implied by fixed injections, solving each connected
/// component with one bus as slack; `None` if a component is unbalanced.
pub fn dc_flows(case: &GridCase, topology: &Topology, injections: &[f64]) -> Option<Vec<f64>> {
    let comps = bus_components(case, topology);
    let n_comp = comps.iter().max().map_or(0, |&c| c + 1);
    let ends = case.line_endpoints();
    let mut theta = vec![0.0; case.n_buses()];
    for c in 0..n_comp {
        let buses: Vec<usize> = (0..case.n_buses()).filter(|&b| comps[b] == c).collect();
        let net: f64 = buses.iter().map(|&b| injections[b]).sum();
        let scale: f64 = buses.iter().map(|&b| injections[b].abs()).sum::<f64>().max(1.0);
        if net.abs() > 1e-6 * scale {
            return None;
        }
        if buses.len() == 1 {
            continue;
        }
        // Slack = first bus; the rest form the reduced system.
        let local: Vec<Option<usize>> = {
            let mut map = vec![None; case.n_buses()];
            for (k, &b) in buses.iter().skip(1).enumerate() {
                map[b] = Some(k);
            }
            map
        };
        let k = buses.len() - 1;
        let mut b_red = DMatrix::zeros(k, k);
        for (l, line) in case.lines.iter().enumerate() {
            if !topology.in_service(l) || comps[ends[l].0] != c {
                continue;
            }
            let y = 1.0 / line.reactance_pu;
            let (i, j) = (local[ends[l].0], local[ends[l].1]);
            if let Some(i) = i {
                b_red[(i, i)] += y;
            }
            if let Some(j) = j {
                b_red[(j, j)] += y;
            }
            if let (Some(i), Some(j)) = (i, j) {
                b_red[(i, j)] -= y;
                b_red[(j, i)] -= y;
            }
        }
        let p = DVector::from_iterator(k, buses.iter().skip(1).map(|&b| injections[b]));
        let sol = b_red.lu().solve(&p)?;
        for (idx, &b) in buses.iter().skip(1).enumerate() {
            theta[b] = sol[idx];
        }
    }
    Some(
        case.lines
            .iter()
            .enumerate()
            .map(|(l, line)| {
                if topology.in_service(l) {
                    (theta[ends[l].0] - theta[ends[l].1]) / line.reactance_pu
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Fraction of contingencies the checker accepts; 1 when there are none.
pub fn reliability_of(case: &GridCase, topology: &Topology, injections: &[f64], checker: &dyn FeasibilityChecker) -> f64 {
    let list = contingency_list(case, topology);
    if list.is_empty() {
        return 1.0;
    }
    let ok = list.par_iter().filter(|c| checker.feasible(case, topology, c.line, injections)).count();
    ok as f64 / list.len() as f64
}

/// Reliability of the realized operating point of one hour.
pub fn state_reliability(
    case: &GridCase,
    topology: &Topology,
    state: &HourlyRealization,
    decision: &RtDecision,
    checker: &dyn FeasibilityChecker,
) -> f64 {
    reliability_of(case, topology, &decision.injections(case, state), checker)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub reliability: f64,
    #[serde(rename = "shed_MW")]
    pub shed_mw: f64,
    pub operating_cost: f64,
}

/// Per-scenario summary over all visited real-time hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub mean_reliability: f64,
    #[serde(rename = "mean_shed_MW")]
    pub mean_shed_mw: f64,
    /// Mean shedding as a fraction of the total peak load.
    pub mean_shed_frac: f64,
    /// Weighted operating cost estimate of the evaluated horizon.
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceThresholds {
    pub r_min: f64,
    pub shed_max_frac: f64,
    pub alpha_r: f64,
    pub alpha_shed: f64,
}

impl Default for ChanceThresholds {
    fn default() -> Self {
        Self { r_min: 0.8, shed_max_frac: 0.005, alpha_r: 0.05, alpha_shed: 0.05 }
    }
}

impl ChanceThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_min", self.r_min),
            ("shed_max_frac", self.shed_max_frac),
            ("alpha_r", self.alpha_r),
            ("alpha_shed", self.alpha_shed),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("thresholds.{name}"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceOutcome {
    pub p_r: f64,
    pub p_ls: f64,
    pub reliability_ok: bool,
    pub shed_ok: bool,
}

pub fn evaluate_chance(per_scenario: &[ScenarioMetrics], thr: &ChanceThresholds, total_load_capacity_mw: f64) -> ChanceOutcome {
    assert!(!per_scenario.is_empty(), "at least one scenario required");
    let n = per_scenario.len() as f64;
    let r_ok = per_scenario.iter().filter(|s| s.mean_reliability >= thr.r_min).count() as f64;
    let cap = thr.shed_max_frac * total_load_capacity_mw;
    let ls_ok = per_scenario.iter().filter(|s| s.mean_shed_mw <= cap).count() as f64;
    let p_r = r_ok / n;
    let p_ls = ls_ok / n;
    ChanceOutcome { p_r, p_ls, reliability_ok: p_r >= 1.0 - thr.alpha_r, shed_ok: p_ls >= 1.0 - thr.alpha_shed }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub expected_cost: f64,
    pub p_reliability_ok: f64,
    pub p_shed_ok: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMetrics {
    pub per_scenario: Vec<ScenarioMetrics>,
    pub aggregate: AggregateMetrics,
}

impl ScheduleMetrics {
    pub fn from_scenarios(per_scenario: Vec<ScenarioMetrics>, thr: &ChanceThresholds, total_load_capacity_mw: f64) -> Self {
        let chance = evaluate_chance(&per_scenario, thr, total_load_capacity_mw);
        let expected_cost = per_scenario.iter().map(|s| s.total_cost).sum::<f64>() / per_scenario.len() as f64;
        ScheduleMetrics {
            per_scenario,
            aggregate: AggregateMetrics { expected_cost, p_reliability_ok: chance.p_r, p_shed_ok: chance.p_ls },
        }
    }

    pub fn mean_reliability(&self) -> f64 {
        self.per_scenario.iter().map(|s| s.mean_reliability).sum::<f64>() / self.per_scenario.len() as f64
    }

    pub fn mean_shed_frac(&self) -> f64 {
        self.per_scenario.iter().map(|s| s.mean_shed_frac).sum::<f64>() / self.per_scenario.len() as f64
    }
}
