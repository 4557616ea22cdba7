//! Hourly real-time redispatch around the day-ahead commitment.

use gridsched_milp::{solve_lp_with, solve_milp_with, LinearProgram, MixedIntegerProgram, Relation, Status};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridCase, Topology};
use crate::stochastic::HourlyRealization;
use crate::uc::{add_balance, add_network, network_violations, pinned_buses, solver_options, UcSolution};

/// Constraints dropped to restore feasibility, in the order they are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    #[default]
    None,
    Ramp,
    RampAndMinOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RtOptions {
    /// Lets offline units with a minimum up time of at most one hour start
    /// in real time, paying their hot start-up cost.
    pub allow_emergency_commit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtDecision {
    /// Hour of the day.
    pub hour: usize,
    #[serde(rename = "dispatch_MW")]
    pub dispatch_mw: Vec<f64>,
    pub redispatch_cost: f64,
    #[serde(rename = "wind_curtail_MW")]
    pub wind_curtail_mw: Vec<f64>,
    #[serde(rename = "load_shed_MW")]
    pub load_shed_mw: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub curtail_cost: f64,
    pub shed_cost: f64,
    pub total_cost: f64,
    /// Generators started outside the day-ahead commitment.
    pub emergency_starts: Vec<usize>,
    pub relaxation: Relaxation,
}

impl RtDecision {
    pub fn total_shed_mw(&self) -> f64 {
        self.load_shed_mw.iter().sum()
    }

    pub fn total_curtail_mw(&self) -> f64 {
        self.wind_curtail_mw.iter().sum()
    }

    /// Net injection per bus at this operating point.
    pub fn injections(&self, case: &GridCase, state: &HourlyRealization) -> Vec<f64> {
        let mut inj: Vec<f64> = state.load.iter().zip(&self.load_shed_mw).map(|(d, ls)| ls - d).collect();
        for (g, b) in case.gen_bus_positions().into_iter().enumerate() {
            inj[b] += self.dispatch_mw[g];
        }
        for (i, b) in case.wind_bus_positions().into_iter().enumerate() {
            inj[b] += state.wind[i] - self.wind_curtail_mw[i];
        }
        inj
    }
}

/// Operating cost of a decision excluding load shedding, which the
/// shedding chance constraint accounts for separately.
pub fn rt_operating_cost(decision: &RtDecision) -> f64 {
    decision.total_cost - decision.shed_cost
}

/// Output a committed generator must stay near this hour: the previous
/// decision when the unit was already on, otherwise the baseline itself.
fn ramp_anchor(baseline: &UcSolution, g: usize, hour: usize, prev: Option<&RtDecision>) -> Option<f64> {
    match prev {
        Some(p) if p.hour + 1 == hour => baseline.commitment[g][p.hour].then_some(p.dispatch_mw[g]),
        _ => Some(baseline.dispatch_mw[g][hour]),
    }
}

struct Cols {
    up: Vec<Vec<(usize, f64)>>,
    dn: Vec<Vec<(usize, f64)>>,
    emergency: Vec<Option<(usize, Vec<usize>)>>,
    curtail: Vec<usize>,
    shed: Vec<usize>,
    theta: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn build(
    case: &GridCase,
    topology: &Topology,
    state: &HourlyRealization,
    baseline: &UcSolution,
    hour: usize,
    prev: Option<&RtDecision>,
    opts: &RtOptions,
    relax: Relaxation,
) -> (MixedIntegerProgram, Cols) {
    let mut mip = MixedIntegerProgram::new(LinearProgram::new());
    let gen_bus = case.gen_bus_positions();
    let mut terms = vec![Vec::new(); case.n_buses()];
    let mut rhs = state.load.clone();
    let mut cols = Cols {
        up: vec![Vec::new(); case.n_gens()],
        dn: vec![Vec::new(); case.n_gens()],
        emergency: vec![None; case.n_gens()],
        curtail: Vec::new(),
        shed: Vec::new(),
        theta: Vec::new(),
    };

    for (g, gen) in case.dispatchable_generators.iter().enumerate() {
        let bus = gen_bus[g];
        if baseline.commitment[g][hour] {
            let base = baseline.dispatch_mw[g][hour];
            rhs[bus] -= base;
            // Deviation columns per cost block, priced at the block price.
            let mut start = 0.0;
            for (k, (width, price)) in gen.blocks().into_iter().enumerate() {
                let end = start + width;
                let above = end - base.max(start);
                let below = base.min(end) - start;
                if above > 1e-12 {
                    let j = mip.lp.add_var(format!("up_{}_{k}", gen.id), 0.0, above, price);
                    cols.up[g].push((j, price));
                    terms[bus].push((j, 1.0));
                }
                if below > 1e-12 {
                    let j = mip.lp.add_var(format!("dn_{}_{k}", gen.id), 0.0, below, price);
                    cols.dn[g].push((j, price));
                    terms[bus].push((j, -1.0));
                }
                start = end;
            }
            let delta: Vec<(usize, f64)> =
                cols.up[g].iter().map(|&(j, _)| (j, 1.0)).chain(cols.dn[g].iter().map(|&(j, _)| (j, -1.0))).collect();
            if delta.is_empty() {
                continue;
            }
            if relax < Relaxation::RampAndMinOutput {
                mip.lp.add_constraint(delta.clone(), Relation::Ge, gen.p_min_mw - base);
            }
            if relax == Relaxation::None {
                if let Some(anchor) = ramp_anchor(baseline, g, hour, prev) {
                    mip.lp.add_constraint(delta.clone(), Relation::Le, anchor + gen.ramp_up_mw_per_h - base);
                    mip.lp.add_constraint(delta, Relation::Ge, anchor - gen.ramp_down_mw_per_h - base);
                }
            }
        } else if opts.allow_emergency_commit && gen.min_up_h <= 1 {
            let on = mip.add_binary(format!("emergency_{}", gen.id), gen.hot_start_cost());
            let blocks: Vec<usize> = gen
                .blocks()
                .into_iter()
                .enumerate()
                .map(|(k, (width, price))| mip.lp.add_var(format!("em_{}_{k}", gen.id), 0.0, width, price))
                .collect();
            let out: Vec<(usize, f64)> = blocks.iter().map(|&j| (j, 1.0)).collect();
            let mut lo = out.clone();
            lo.push((on, -gen.p_min_mw));
            mip.lp.add_constraint(lo, Relation::Ge, 0.0);
            let mut hi = out.clone();
            hi.push((on, -gen.p_max_mw));
            mip.lp.add_constraint(hi, Relation::Le, 0.0);
            terms[bus].extend(out);
            cols.emergency[g] = Some((on, blocks));
        }
    }
    for (i, (w, b)) in case.wind_generators.iter().zip(case.wind_bus_positions()).enumerate() {
        let j = mip.lp.add_var(format!("wc_{}", w.id), 0.0, state.wind[i], case.wind_curtail_price());
        terms[b].push((j, -1.0));
        rhs[b] -= state.wind[i];
        cols.curtail.push(j);
    }
    for (b, bus) in case.buses.iter().enumerate() {
        let j = mip.lp.add_var(format!("ls_{}", bus.id), 0.0, state.load[b], case.voll());
        terms[b].push((j, 1.0));
        cols.shed.push(j);
    }
    let net = add_network(&mut mip.lp, case, topology, &pinned_buses(case, topology), "rt");
    add_balance(&mut mip.lp, case, &net, terms, &rhs);
    cols.theta = net.theta;
    (mip, cols)
}

/// Solves the redispatch LP of one hour. Commitment follows `baseline`;
/// if the ramp or minimum-output limits make the hour infeasible they are
/// dropped in that order and the decision records the relaxation.
#[allow(clippy::too_many_arguments)]
pub fn solve_rt(
    case: &GridCase,
    topology: &Topology,
    state: &HourlyRealization,
    baseline: &UcSolution,
    hour: usize,
    prev: Option<&RtDecision>,
    opts: &RtOptions,
) -> Result<RtDecision> {
    topology.check(case)?;
    if hour >= baseline.hours() {
        return Err(Error::validation("hour", format!("hour {hour} beyond the {}-hour baseline", baseline.hours())));
    }
    if state.load.len() != case.n_buses() || state.wind.len() != case.n_wind() {
        return Err(Error::validation("state", "dimension mismatch with case"));
    }
    let solver = solver_options();
    for relax in [Relaxation::None, Relaxation::Ramp, Relaxation::RampAndMinOutput] {
        let (mip, cols) = build(case, topology, state, baseline, hour, prev, opts, relax);
        let sol = if mip.binary_vars.is_empty() {
            solve_lp_with(&mip.lp, &solver.lp)?
        } else {
            solve_milp_with(&mip, &solver)?.0
        };
        if sol.status != Status::Optimal {
            continue;
        }
        if relax != Relaxation::None {
            log::warn!("real-time hour {hour}: infeasible as posed, solved with relaxation {relax:?}");
        }
        let x = &sol.values;
        let mut dispatch = vec![0.0; case.n_gens()];
        let mut redispatch = 0.0;
        let mut emergency_starts = Vec::new();
        for g in 0..case.n_gens() {
            if baseline.commitment[g][hour] {
                let up: f64 = cols.up[g].iter().map(|&(j, _)| x[j]).sum();
                let dn: f64 = cols.dn[g].iter().map(|&(j, _)| x[j]).sum();
                dispatch[g] = (baseline.dispatch_mw[g][hour] + up - dn).max(0.0);
                redispatch += cols.up[g].iter().chain(&cols.dn[g]).map(|&(j, p)| p * x[j]).sum::<f64>();
            } else if let Some((on, blocks)) = &cols.emergency[g] {
                if x[*on] > 0.5 {
                    emergency_starts.push(g);
                    dispatch[g] = blocks.iter().map(|&j| x[j]).sum();
                    redispatch += blocks.iter().map(|&j| x[j] * mip.lp.objective[j]).sum::<f64>()
                        + case.dispatchable_generators[g].hot_start_cost();
                }
            }
        }
        let wind_curtail_mw: Vec<f64> = cols.curtail.iter().map(|&j| x[j].max(0.0)).collect();
        let load_shed_mw: Vec<f64> = cols.shed.iter().map(|&j| x[j].max(0.0)).collect();
        let curtail_cost = case.wind_curtail_price() * wind_curtail_mw.iter().sum::<f64>();
        let shed_cost = case.voll() * load_shed_mw.iter().sum::<f64>();
        return Ok(RtDecision {
            hour,
            dispatch_mw: dispatch,
            redispatch_cost: redispatch,
            angles_rad: cols.theta.iter().map(|&j| x[j]).collect(),
            wind_curtail_mw,
            load_shed_mw,
            curtail_cost,
            shed_cost,
            total_cost: redispatch + curtail_cost + shed_cost,
            emergency_starts,
            relaxation: relax,
        });
    }
    Err(Error::Infeasible { what: format!("real-time redispatch at hour {hour}") })
}

/// Independent check of a decision against the case; returns one message
/// per violation.
pub fn verify_rt(
    case: &GridCase,
    topology: &Topology,
    state: &HourlyRealization,
    baseline: &UcSolution,
    decision: &RtDecision,
    prev: Option<&RtDecision>,
    tol: f64,
) -> Vec<String> {
    let hour = decision.hour;
    let mut bad = Vec::new();
    for (g, gen) in case.dispatchable_generators.iter().enumerate() {
        let p = decision.dispatch_mw[g];
        let on = baseline.commitment[g][hour] || decision.emergency_starts.contains(&g);
        if !on && p.abs() > tol {
            bad.push(format!("gen {} off but producing {p}", gen.id));
        }
        let floor = if decision.relaxation >= Relaxation::RampAndMinOutput { 0.0 } else { gen.p_min_mw };
        if on && (p < floor - tol || p > gen.p_max_mw + tol) {
            bad.push(format!("gen {} output {p} outside limits", gen.id));
        }
        if decision.relaxation == Relaxation::None && baseline.commitment[g][hour] {
            if let Some(anchor) = ramp_anchor(baseline, g, hour, prev) {
                if p - anchor > gen.ramp_up_mw_per_h + tol || anchor - p > gen.ramp_down_mw_per_h + tol {
                    bad.push(format!("gen {} ramps from {anchor} to {p}", gen.id));
                }
            }
        }
    }
    for (i, &wc) in decision.wind_curtail_mw.iter().enumerate() {
        if wc < -tol || wc > state.wind[i] + tol {
            bad.push(format!("wind {i} curtailment {wc} outside [0, {}]", state.wind[i]));
        }
    }
    for (b, &ls) in decision.load_shed_mw.iter().enumerate() {
        if ls < -tol || ls > state.load[b] + tol {
            bad.push(format!("bus {b} shedding {ls} outside [0, {}]", state.load[b]));
        }
    }
    let inj = decision.injections(case, state);
    bad.extend(network_violations(case, topology, &inj, &decision.angles_rad, tol));
    bad
}
