//! Day-ahead unit commitment.
//!
//! Columns per hour `t` (in this order within each hour):
//!
//! * per generator: commitment `α` (binary), start `v` and shutdown `w`
//!   (continuous in [0, 1], tied to `α` by `α_t − α_{t−1} = v_t − w_t`),
//!   one output column per cost block, and one cold-start premium column
//!   when the start-up table has more than one step;
//! * per wind farm: curtailment `WC ∈ [0, Ŵ]`;
//! * per bus: shedding `LS ∈ [0, D̂]` and angle `θ` (pinned to 0 at one
//!   bus of every connected component, the reference bus where present);
//! * per in-service line: flow `f ∈ [−F_max, F_max]`.
//!
//! So a `T`-hour model has `T · (3G + ΣK_g + G_cold + W + 2B + L_in)`
//! columns, see [`uc_variable_count`].

use std::sync::atomic::{AtomicUsize, Ordering};

use gridsched_milp::{solve_milp_with, LinearProgram, LpOptions, MilpOptions, PivotRule, MixedIntegerProgram, Relation, Solution, Status};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{bus_components, dc_matrices_unchecked, GridCase, Topology};
use crate::stochastic::DayAheadForecast;

static EXACT_SOLVES: AtomicUsize = AtomicUsize::new(0);

/// Number of exact UC solves performed by this process.
pub fn exact_solve_count() -> usize {
    EXACT_SOLVES.load(Ordering::SeqCst)
}

/// Generator state before the first hour of a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStatus {
    On(u32),
    Off(u32),
}

impl InitialStatus {
    /// On long enough that no minimum-time constraint binds.
    pub const LONG_ON: InitialStatus = InitialStatus::On(10_000);

    pub fn is_on(self) -> bool {
        matches!(self, InitialStatus::On(_))
    }

    /// Status after the commitment sequence `alpha` has run.
    pub fn after(self, alpha: &[bool]) -> InitialStatus {
        let Some(&last) = alpha.last() else {
            return self;
        };
        let run = alpha.iter().rev().take_while(|&&a| a == last).count() as u32;
        match (self, last) {
            (InitialStatus::On(h), true) if run as usize == alpha.len() => InitialStatus::On(h.saturating_add(run)),
            (InitialStatus::Off(h), false) if run as usize == alpha.len() => InitialStatus::Off(h.saturating_add(run)),
            (_, true) => InitialStatus::On(run),
            (_, false) => InitialStatus::Off(run),
        }
    }

    /// Whether the unit was on `back` hours before the horizon (1 = last
    /// pre-horizon hour).
    fn on_before(self, back: usize) -> bool {
        match self {
            InitialStatus::On(_) => true,
            InitialStatus::Off(h) => back > h as usize,
        }
    }
}

/// The day a solution was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayContext {
    pub topology: Topology,
    /// SHA-256 of the forecast's JSON encoding.
    pub forecast_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcSolution {
    /// `[gen][hour]`.
    pub commitment: Vec<Vec<bool>>,
    #[serde(rename = "dispatch_MW")]
    pub dispatch_mw: Vec<Vec<f64>>,
    #[serde(rename = "wind_curtail_MW")]
    pub wind_curtail_mw: Vec<Vec<f64>>,
    #[serde(rename = "load_shed_MW")]
    pub load_shed_mw: Vec<Vec<f64>>,
    pub angles_rad: Vec<Vec<f64>>,
    /// Objective value: production, start-up, curtailment and shedding.
    pub cost: f64,
    pub initial_status: Vec<InitialStatus>,
    pub day_context: DayContext,
}

impl UcSolution {
    pub fn hours(&self) -> usize {
        self.load_shed_mw.first().map_or(0, Vec::len)
    }

    pub fn total_shed_mw(&self) -> f64 {
        self.load_shed_mw.iter().flatten().sum()
    }

    /// Generator status after the last hour, for chaining days.
    pub fn final_status(&self) -> Vec<InitialStatus> {
        self.initial_status.iter().zip(&self.commitment).map(|(s, a)| s.after(a)).collect()
    }
}

pub fn forecast_digest(forecast: &DayAheadForecast) -> String {
    let bytes = serde_json::to_vec(forecast).expect("forecast serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Column count of a `hours`-hour UC model.
pub fn uc_variable_count(case: &GridCase, topology: &Topology, hours: usize) -> usize {
    let per_gen: usize = case
        .dispatchable_generators
        .iter()
        .map(|g| 3 + g.blocks().len() + usize::from(g.startup_cost_fn.len() > 1))
        .sum();
    let lines = topology.line_status.iter().filter(|&&s| s).count();
    hours * (per_gen + case.n_wind() + 2 * case.n_buses() + lines)
}

/// Angle and flow columns of one hour's DC network.
pub(crate) struct NetworkVars {
    pub theta: Vec<usize>,
    pub flow: Vec<Option<usize>>,
}

/// Bus whose angle is pinned in each component: a reference bus if the
/// component holds one, else its lowest-index bus.
pub(crate) fn pinned_buses(case: &GridCase, topology: &Topology) -> Vec<bool> {
    let comps = bus_components(case, topology);
    let n_comp = comps.iter().max().map_or(0, |&c| c + 1);
    let mut pin = vec![usize::MAX; n_comp];
    for r in case.reference_positions() {
        if pin[comps[r]] == usize::MAX {
            pin[comps[r]] = r;
        }
    }
    for (b, &c) in comps.iter().enumerate() {
        if pin[c] == usize::MAX {
            pin[c] = b;
        }
    }
    let mut out = vec![false; case.n_buses()];
    for p in pin {
        out[p] = true;
    }
    out
}

/// Adds angle and flow columns plus flow-definition rows
/// `f_l − (θ_i − θ_j)/x_l = 0`.
pub(crate) fn add_network(
    lp: &mut LinearProgram,
    case: &GridCase,
    topology: &Topology,
    pinned: &[bool],
    tag: &str,
) -> NetworkVars {
    let theta: Vec<usize> = case
        .buses
        .iter()
        .zip(pinned)
        .map(|(b, &pin)| {
            let (lo, hi) = if pin { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            lp.add_var(format!("theta_{}_{tag}", b.id), lo, hi, 0.0)
        })
        .collect();
    let ends = case.line_endpoints();
    let mut flow = Vec::with_capacity(case.n_lines());
    for (l, line) in case.lines.iter().enumerate() {
        if !topology.in_service(l) {
            flow.push(None);
            continue;
        }
        let f = lp.add_var(format!("flow_{}_{tag}", line.id), -line.flow_limit_mw, line.flow_limit_mw, 0.0);
        let b = 1.0 / line.reactance_pu;
        lp.add_constraint(vec![(f, 1.0), (theta[ends[l].0], -b), (theta[ends[l].1], b)], Relation::Eq, 0.0);
        flow.push(Some(f));
    }
    NetworkVars { theta, flow }
}

/// Adds one nodal balance row per bus: `injection terms − net outflow = rhs`.
pub(crate) fn add_balance(
    lp: &mut LinearProgram,
    case: &GridCase,
    net: &NetworkVars,
    mut terms: Vec<Vec<(usize, f64)>>,
    rhs: &[f64],
) {
    for (l, &(f, t)) in case.line_endpoints().iter().enumerate() {
        if let Some(v) = net.flow[l] {
            terms[f].push((v, -1.0));
            terms[t].push((v, 1.0));
        }
    }
    for (b, row) in terms.into_iter().enumerate() {
        lp.add_constraint(row, Relation::Eq, rhs[b]);
    }
}

/// The UC model together with the column map needed to read a solution.
pub struct UcModel {
    pub mip: MixedIntegerProgram,
    hours: usize,
    alpha: Vec<Vec<usize>>,
    blocks: Vec<Vec<Vec<usize>>>,
    curtail: Vec<Vec<usize>>,
    shed: Vec<Vec<usize>>,
    theta: Vec<Vec<usize>>,
}

fn check_inputs(case: &GridCase, topology: &Topology, forecast: &DayAheadForecast, initial: &[InitialStatus]) -> Result<()> {
    topology.check(case)?;
    forecast.check(case)?;
    if initial.len() != case.n_gens() {
        return Err(Error::validation(
            "initial_status",
            format!("{} entries for {} generators", initial.len(), case.n_gens()),
        ));
    }
    if forecast.hours() == 0 {
        return Err(Error::validation("forecast", "empty horizon"));
    }
    Ok(())
}

impl UcModel {
    pub fn build(
        case: &GridCase,
        topology: &Topology,
        forecast: &DayAheadForecast,
        initial: &[InitialStatus],
    ) -> Result<Self> {
        check_inputs(case, topology, forecast, initial)?;
        let hours = forecast.hours();
        let n_gen = case.n_gens();
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let pinned = pinned_buses(case, topology);
        let gen_bus = case.gen_bus_positions();
        let wind_bus = case.wind_bus_positions();
        let voll = case.voll();
        let c_wc = case.wind_curtail_price();

        let mut alpha = vec![Vec::with_capacity(hours); n_gen];
        let mut start = vec![Vec::with_capacity(hours); n_gen];
        let mut stop = vec![Vec::with_capacity(hours); n_gen];
        let mut blocks = vec![Vec::with_capacity(hours); n_gen];
        let mut cold = vec![Vec::with_capacity(hours); n_gen];
        let mut curtail = vec![Vec::with_capacity(hours); case.n_wind()];
        let mut shed = vec![Vec::with_capacity(hours); case.n_buses()];
        let mut theta = Vec::with_capacity(hours);

        for t in 0..hours {
            for (g, gen) in case.dispatchable_generators.iter().enumerate() {
                let a = mip.add_binary(format!("alpha_{}_{t}", gen.id), 0.0);
                let v = mip.lp.add_var(format!("start_{}_{t}", gen.id), 0.0, 1.0, gen.hot_start_cost());
                let w = mip.lp.add_var(format!("stop_{}_{t}", gen.id), 0.0, 1.0, 0.0);
                let bl: Vec<usize> = gen
                    .blocks()
                    .iter()
                    .enumerate()
                    .map(|(k, &(width, price))| mip.lp.add_var(format!("p_{}_{t}_{k}", gen.id), 0.0, width, price))
                    .collect();
                let c = (gen.startup_cost_fn.len() > 1)
                    .then(|| mip.lp.add_var(format!("cold_{}_{t}", gen.id), 0.0, f64::INFINITY, 1.0));
                alpha[g].push(a);
                start[g].push(v);
                stop[g].push(w);
                blocks[g].push(bl);
                cold[g].push(c);
            }
            for (i, w) in case.wind_generators.iter().enumerate() {
                curtail[i].push(mip.lp.add_var(format!("wc_{}_{t}", w.id), 0.0, forecast.wind[i][t], c_wc));
            }
            for (b, bus) in case.buses.iter().enumerate() {
                shed[b].push(mip.lp.add_var(format!("ls_{}_{t}", bus.id), 0.0, forecast.load[b][t], voll));
            }
            let net = add_network(&mut mip.lp, case, topology, &pinned, &t.to_string());

            let mut terms = vec![Vec::new(); case.n_buses()];
            let mut rhs: Vec<f64> = (0..case.n_buses()).map(|b| forecast.load[b][t]).collect();
            for g in 0..n_gen {
                terms[gen_bus[g]].extend(blocks[g][t].iter().map(|&p| (p, 1.0)));
            }
            for (i, &b) in wind_bus.iter().enumerate() {
                terms[b].push((curtail[i][t], -1.0));
                rhs[b] -= forecast.wind[i][t];
            }
            for b in 0..case.n_buses() {
                terms[b].push((shed[b][t], 1.0));
            }
            add_balance(&mut mip.lp, case, &net, terms, &rhs);
            theta.push(net.theta);
        }

        for (g, gen) in case.dispatchable_generators.iter().enumerate() {
            let init = initial[g];
            for t in 0..hours {
                let (a, v, w) = (alpha[g][t], start[g][t], stop[g][t]);
                // Output within [α·p_min, α·p_max].
                let out: Vec<(usize, f64)> = blocks[g][t].iter().map(|&p| (p, 1.0)).collect();
                let mut lo = out.clone();
                lo.push((a, -gen.p_min_mw));
                mip.lp.add_constraint(lo, Relation::Ge, 0.0);
                let mut hi = out;
                hi.push((a, -gen.p_max_mw));
                mip.lp.add_constraint(hi, Relation::Le, 0.0);

                // Start/stop transition.
                if t == 0 {
                    let prev = if init.is_on() { 1.0 } else { 0.0 };
                    mip.lp.add_constraint(vec![(a, 1.0), (v, -1.0), (w, 1.0)], Relation::Eq, prev);
                } else {
                    mip.lp.add_constraint(vec![(a, 1.0), (alpha[g][t - 1], -1.0), (v, -1.0), (w, 1.0)], Relation::Eq, 0.0);
                }

                // Minimum up and down times.
                let up = gen.min_up_h as usize;
                if up > 1 {
                    let mut row: Vec<(usize, f64)> = (t.saturating_sub(up - 1)..=t).map(|k| (start[g][k], 1.0)).collect();
                    row.push((a, -1.0));
                    mip.lp.add_constraint(row, Relation::Le, 0.0);
                }
                let down = gen.min_down_h as usize;
                if down > 1 {
                    let mut row: Vec<(usize, f64)> = (t.saturating_sub(down - 1)..=t).map(|k| (stop[g][k], 1.0)).collect();
                    row.push((a, 1.0));
                    mip.lp.add_constraint(row, Relation::Le, 1.0);
                }

                // Cold-start premium: su_t ≥ (c_k − c_0)(v_t − Σ_{j=1..m_k} α_{t−j}).
                if let Some(su) = cold[g][t] {
                    let base = gen.hot_start_cost();
                    for step in &gen.startup_cost_fn[1..] {
                        let extra = step.cost - base;
                        let mut row = vec![(su, 1.0), (v, -extra)];
                        let mut constant = 0.0;
                        for j in 1..=step.min_hours_off as usize {
                            if j <= t {
                                row.push((alpha[g][t - j], extra));
                            } else if init.on_before(j - t) {
                                constant += 1.0;
                            }
                        }
                        if constant == 0.0 {
                            mip.lp.add_constraint(row, Relation::Ge, 0.0);
                        }
                    }
                }
            }
            // Hours forced by the status before the horizon.
            let forced = match init {
                InitialStatus::On(h) if (h as usize) < gen.min_up_h as usize => Some((gen.min_up_h - h, 1.0)),
                InitialStatus::Off(h) if (h as usize) < gen.min_down_h as usize => Some((gen.min_down_h - h, 0.0)),
                _ => None,
            };
            if let Some((n, val)) = forced {
                for t in 0..(n as usize).min(hours) {
                    mip.lp.bounds[alpha[g][t]] = (val, val);
                }
            }
        }

        Ok(UcModel { mip, hours, alpha, blocks, curtail, shed, theta })
    }

    /// Reads a solved column vector back into a [`UcSolution`].
    pub fn extract(
        &self,
        sol: &Solution,
        topology: &Topology,
        forecast: &DayAheadForecast,
        initial: &[InitialStatus],
    ) -> UcSolution {
        let x = &sol.values;
        let per_hour = |cols: &Vec<Vec<usize>>| -> Vec<Vec<f64>> {
            cols.iter().map(|row| row.iter().map(|&j| x[j].max(0.0)).collect()).collect()
        };
        let commitment = self.alpha.iter().map(|row| row.iter().map(|&j| x[j] > 0.5).collect()).collect();
        let dispatch_mw = self
            .blocks
            .iter()
            .map(|row| row.iter().map(|bl| bl.iter().map(|&j| x[j]).sum::<f64>().max(0.0)).collect())
            .collect();
        let angles_rad = (0..self.theta[0].len())
            .map(|b| (0..self.hours).map(|t| x[self.theta[t][b]]).collect())
            .collect();
        UcSolution {
            commitment,
            dispatch_mw,
            wind_curtail_mw: per_hour(&self.curtail),
            load_shed_mw: per_hour(&self.shed),
            angles_rad,
            cost: sol.objective,
            initial_status: initial.to_vec(),
            day_context: DayContext { topology: topology.clone(), forecast_digest: forecast_digest(forecast) },
        }
    }
}

pub fn build_uc(
    case: &GridCase,
    topology: &Topology,
    forecast: &DayAheadForecast,
    initial: &[InitialStatus],
) -> Result<MixedIntegerProgram> {
    Ok(UcModel::build(case, topology, forecast, initial)?.mip)
}

pub fn solve_uc(
    case: &GridCase,
    topology: &Topology,
    forecast: &DayAheadForecast,
    initial: &[InitialStatus],
) -> Result<UcSolution> {
    solve_uc_with(case, topology, forecast, initial, &solver_options())
}

/// Solver settings used for every UC and redispatch problem: Dantzig
/// pricing (with the Bland fallback on degenerate stalls) is orders of
/// magnitude faster than pure Bland on these models.
pub fn solver_options() -> MilpOptions {
    MilpOptions { lp: LpOptions { pivot_rule: PivotRule::Dantzig, iteration_cap: None }, ..MilpOptions::default() }
}

pub fn solve_uc_with(
    case: &GridCase,
    topology: &Topology,
    forecast: &DayAheadForecast,
    initial: &[InitialStatus],
    opts: &MilpOptions,
) -> Result<UcSolution> {
    let model = UcModel::build(case, topology, forecast, initial)?;
    EXACT_SOLVES.fetch_add(1, Ordering::SeqCst);
    let (sol, _) = solve_milp_with(&model.mip, opts)?;
    if sol.status != Status::Optimal {
        return Err(Error::Infeasible { what: "unit commitment".into() });
    }
    Ok(model.extract(&sol, topology, forecast, initial))
}

/// Objective of a UC solution recomputed from the case: production cost,
/// start-up cost by hours offline, curtailment and shedding.
pub fn uc_cost(case: &GridCase, sol: &UcSolution) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in case.dispatchable_generators.iter().enumerate() {
        let alpha = &sol.commitment[g];
        for t in 0..alpha.len() {
            if alpha[t] {
                cost += gen.cost_at(sol.dispatch_mw[g][t]);
            }
            let was_on = if t == 0 { sol.initial_status[g].is_on() } else { alpha[t - 1] };
            if alpha[t] && !was_on {
                let mut off = alpha[..t].iter().rev().take_while(|&&a| !a).count() as u32;
                if off as usize == t {
                    if let InitialStatus::Off(h) = sol.initial_status[g] {
                        off = off.saturating_add(h);
                    }
                }
                cost += gen.startup_cost(off.max(1));
            }
        }
    }
    cost += case.wind_curtail_price() * sol.wind_curtail_mw.iter().flatten().sum::<f64>();
    cost += case.voll() * sol.total_shed_mw();
    cost
}

/// Independent feasibility check of a UC solution against the case data;
/// returns one message per violated condition.
pub fn verify_uc(case: &GridCase, topology: &Topology, forecast: &DayAheadForecast, sol: &UcSolution, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let hours = forecast.hours();
    for (g, gen) in case.dispatchable_generators.iter().enumerate() {
        let alpha = &sol.commitment[g];
        for t in 0..hours {
            let p = sol.dispatch_mw[g][t];
            let ok = if alpha[t] {
                p >= gen.p_min_mw - tol && p <= gen.p_max_mw + tol
            } else {
                p.abs() <= tol
            };
            if !ok {
                bad.push(format!("gen {} hour {t}: output {p} inconsistent with commitment {}", gen.id, alpha[t]));
            }
        }
        bad.extend(min_time_violations(gen.id, gen.min_up_h, gen.min_down_h, sol.initial_status[g], alpha));
    }
    for (i, row) in sol.wind_curtail_mw.iter().enumerate() {
        for t in 0..hours {
            if row[t] < -tol || row[t] > forecast.wind[i][t] + tol {
                bad.push(format!("wind {i} hour {t}: curtailment {} outside [0, forecast]", row[t]));
            }
        }
    }
    for (b, row) in sol.load_shed_mw.iter().enumerate() {
        for t in 0..hours {
            if row[t] < -tol || row[t] > forecast.load[b][t] + tol {
                bad.push(format!("bus {b} hour {t}: shedding {} outside [0, forecast]", row[t]));
            }
        }
    }
    let gen_bus = case.gen_bus_positions();
    let wind_bus = case.wind_bus_positions();
    for t in 0..hours {
        let mut inj = vec![0.0; case.n_buses()];
        for g in 0..case.n_gens() {
            inj[gen_bus[g]] += sol.dispatch_mw[g][t];
        }
        for (i, &b) in wind_bus.iter().enumerate() {
            inj[b] += forecast.wind[i][t] - sol.wind_curtail_mw[i][t];
        }
        for b in 0..case.n_buses() {
            inj[b] -= forecast.load[b][t] - sol.load_shed_mw[b][t];
        }
        let theta: Vec<f64> = sol.angles_rad.iter().map(|r| r[t]).collect();
        bad.extend(network_violations(case, topology, &inj, &theta, tol).into_iter().map(|m| format!("hour {t}: {m}")));
    }
    bad
}

/// Nodal balance, flow-limit and reference-angle violations of an
/// operating point with net injections `inj` and angles `theta`.
pub fn network_violations(case: &GridCase, topology: &Topology, inj: &[f64], theta: &[f64], tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let dc = dc_matrices_unchecked(case, topology);
    let th = DVector::from_column_slice(theta);
    let computed = dc.injections(&th);
    for b in 0..case.n_buses() {
        let r = computed[b] - inj[b];
        if r.abs() > tol {
            bad.push(format!("bus {} balance residual {r}", case.buses[b].id));
        }
    }
    let flows = dc.flows(&th);
    for (l, line) in case.lines.iter().enumerate() {
        if flows[l].abs() > line.flow_limit_mw + tol {
            bad.push(format!("line {} flow {} above {}", line.id, flows[l], line.flow_limit_mw));
        }
    }
    if let Some(&r) = case.reference_positions().first() {
        if theta[r] != 0.0 {
            bad.push(format!("reference angle {}", theta[r]));
        }
    }
    bad
}

/// Minimum up/down violations of a commitment sequence, counting the run
/// that was in progress before the horizon.
pub fn min_time_violations(id: u32, min_up: u32, min_down: u32, init: InitialStatus, alpha: &[bool]) -> Vec<String> {
    let need = |on: bool| if on { min_up } else { min_down } as usize;
    let mut bad = Vec::new();
    let (pre_on, pre_len) = match init {
        InitialStatus::On(h) => (true, h as usize),
        InitialStatus::Off(h) => (false, h as usize),
    };
    if alpha.first().is_some_and(|&a| a != pre_on) && pre_len < need(pre_on) {
        bad.push(format!("gen {id}: pre-horizon run of {pre_len}h ended at hour 0"));
    }
    let n = alpha.len();
    let mut t = 0;
    while t < n {
        let state = alpha[t];
        let end = t + alpha[t..].iter().take_while(|&&a| a == state).count();
        let len = end - t + if t == 0 && state == pre_on { pre_len } else { 0 };
        if end < n && len < need(state) {
            bad.push(format!(
                "gen {id}: {} run of {len}h ending at hour {end} shorter than {}h",
                if state { "on" } else { "off" },
                need(state)
            ));
        }
        t = end;
    }
    bad
}
