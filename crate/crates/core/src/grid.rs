//! Static network description, case files, test-case modifications and the
//! linear DC power-flow coefficient matrices.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    #[serde(rename = "peak_load_MW")]
    pub peak_load_mw: f64,
    pub load_profile_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    pub reactance_pu: f64,
    #[serde(rename = "flow_limit_MW")]
    pub flow_limit_mw: f64,
}

/// One block of a convex piecewise-linear cost curve: output up to
/// `up_to_mw` is priced at `price` $/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSegment {
    #[serde(rename = "up_to_MW")]
    pub up_to_mw: f64,
    pub price: f64,
}

/// Start-up cost `cost` applies once the unit has been off for at least
/// `min_hours_off` hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupStep {
    pub min_hours_off: u32,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchableGenerator {
    pub id: u32,
    pub bus: u32,
    #[serde(rename = "p_min_MW")]
    pub p_min_mw: f64,
    #[serde(rename = "p_max_MW")]
    pub p_max_mw: f64,
    #[serde(rename = "ramp_up_MW_per_h")]
    pub ramp_up_mw_per_h: f64,
    #[serde(rename = "ramp_down_MW_per_h")]
    pub ramp_down_mw_per_h: f64,
    pub min_up_h: u32,
    pub min_down_h: u32,
    pub cost_curve: Vec<CostSegment>,
    pub startup_cost_fn: Vec<StartupStep>,
}

impl DispatchableGenerator {
    /// `(width, price)` blocks covering `[0, p_max]`.
    pub fn blocks(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.cost_curve.len());
        let mut start = 0.0;
        for seg in &self.cost_curve {
            let end = seg.up_to_mw.min(self.p_max_mw);
            if end > start {
                out.push((end - start, seg.price));
                start = end;
            }
        }
        out
    }

    /// Production cost `f_P(p)` in $/h for an online unit.
    pub fn cost_at(&self, p: f64) -> f64 {
        let mut left = p;
        let mut cost = 0.0;
        for (width, price) in self.blocks() {
            let take = left.min(width);
            if take <= 0.0 {
                break;
            }
            cost += take * price;
            left -= take;
        }
        cost
    }

    /// Start-up cost after `hours_off` hours offline.
    pub fn startup_cost(&self, hours_off: u32) -> f64 {
        self.startup_cost_fn
            .iter()
            .filter(|s| hours_off >= s.min_hours_off)
            .map(|s| s.cost)
            .fold(0.0, f64::max)
    }

    /// Cheapest start-up cost (a hot start).
    pub fn hot_start_cost(&self) -> f64 {
        self.startup_cost_fn.first().map_or(0.0, |s| s.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindGenerator {
    pub id: u32,
    pub bus: u32,
    #[serde(rename = "capacity_MW")]
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    /// Value of lost load, $/MWh.
    pub voll: f64,
    /// Wind curtailment price, $/MWh.
    pub wind_curtail_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    #[serde(default)]
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub dispatchable_generators: Vec<DispatchableGenerator>,
    pub wind_generators: Vec<WindGenerator>,
    pub reference_buses: Vec<u32>,
    pub prices: Prices,
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.dispatchable_generators.len()
    }

    pub fn n_wind(&self) -> usize {
        self.wind_generators.len()
    }

    pub fn voll(&self) -> f64 {
        self.prices.voll
    }

    pub fn wind_curtail_price(&self) -> f64 {
        self.prices.wind_curtail_price
    }

    pub fn bus_positions(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_index(&self, id: u32) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// `(from, to)` bus positions of every line.
    pub fn line_endpoints(&self) -> Vec<(usize, usize)> {
        let pos = self.bus_positions();
        self.lines.iter().map(|l| (pos[&l.from_bus], pos[&l.to_bus])).collect()
    }

    pub fn gen_bus_positions(&self) -> Vec<usize> {
        let pos = self.bus_positions();
        self.dispatchable_generators.iter().map(|g| pos[&g.bus]).collect()
    }

    pub fn wind_bus_positions(&self) -> Vec<usize> {
        let pos = self.bus_positions();
        self.wind_generators.iter().map(|w| pos[&w.bus]).collect()
    }

    pub fn reference_positions(&self) -> Vec<usize> {
        let pos = self.bus_positions();
        self.reference_buses.iter().map(|id| pos[id]).collect()
    }

    /// Sum of bus peak loads ("overall load capacity").
    pub fn total_peak_load(&self) -> f64 {
        self.buses.iter().map(|b| b.peak_load_mw).sum()
    }

    pub fn total_wind_capacity(&self) -> f64 {
        self.wind_generators.iter().map(|w| w.capacity_mw).sum()
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("case serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut bus_ids = HashSet::new();
        for (i, b) in self.buses.iter().enumerate() {
            if !bus_ids.insert(b.id) {
                return Err(Error::validation(format!("buses[{i}].id"), format!("duplicate bus id {}", b.id)));
            }
            if !(b.peak_load_mw.is_finite() && b.peak_load_mw >= 0.0) {
                return Err(Error::validation(format!("buses[id={}].peak_load_MW", b.id), "must be finite and >= 0"));
            }
        }
        let mut line_ids = HashSet::new();
        for l in &self.lines {
            let at = |field: &str| format!("lines[id={}].{field}", l.id);
            if !line_ids.insert(l.id) {
                return Err(Error::validation(at("id"), "duplicate line id"));
            }
            for (field, bus) in [("from_bus", l.from_bus), ("to_bus", l.to_bus)] {
                if !bus_ids.contains(&bus) {
                    return Err(Error::validation(at(field), format!("line {} references missing bus {bus}", l.id)));
                }
            }
            if l.from_bus == l.to_bus {
                return Err(Error::validation(at("to_bus"), "line endpoints coincide"));
            }
            if !(l.reactance_pu > 0.0 && l.reactance_pu.is_finite()) {
                return Err(Error::validation(at("reactance_pu"), "must be > 0"));
            }
            if !(l.flow_limit_mw > 0.0) {
                return Err(Error::validation(at("flow_limit_MW"), "must be > 0"));
            }
        }
        let mut gen_ids = HashSet::new();
        for g in &self.dispatchable_generators {
            let at = |field: &str| format!("dispatchable_generators[id={}].{field}", g.id);
            if !gen_ids.insert(g.id) {
                return Err(Error::validation(at("id"), "duplicate generator id"));
            }
            if !bus_ids.contains(&g.bus) {
                return Err(Error::validation(at("bus"), format!("missing bus {}", g.bus)));
            }
            if !(g.p_min_mw >= 0.0 && g.p_min_mw <= g.p_max_mw && g.p_max_mw.is_finite()) {
                return Err(Error::validation(at("p_min_MW"), "need 0 <= p_min <= p_max"));
            }
            if !(g.ramp_up_mw_per_h > 0.0 && g.ramp_down_mw_per_h > 0.0) {
                return Err(Error::validation(at("ramp_up_MW_per_h"), "ramp limits must be > 0"));
            }
            if g.min_up_h < 1 || g.min_down_h < 1 {
                return Err(Error::validation(at("min_up_h"), "min up/down times must be >= 1"));
            }
            if g.cost_curve.is_empty() {
                return Err(Error::validation(at("cost_curve"), "at least one segment required"));
            }
            for w in g.cost_curve.windows(2) {
                if w[1].up_to_mw <= w[0].up_to_mw || w[1].price < w[0].price {
                    return Err(Error::validation(
                        at("cost_curve"),
                        "breakpoints must increase and prices must be non-decreasing",
                    ));
                }
            }
            if g.cost_curve.last().unwrap().up_to_mw < g.p_max_mw - 1e-9 {
                return Err(Error::validation(at("cost_curve"), "segments must cover p_max"));
            }
            if g.cost_curve.iter().any(|s| !(s.price.is_finite() && s.price >= 0.0)) {
                return Err(Error::validation(at("cost_curve"), "prices must be finite and >= 0"));
            }
            if let Some(first) = g.startup_cost_fn.first() {
                if first.min_hours_off != 1 {
                    return Err(Error::validation(at("startup_cost_fn"), "first step must start at 1 hour off"));
                }
            }
            for w in g.startup_cost_fn.windows(2) {
                if w[1].min_hours_off <= w[0].min_hours_off || w[1].cost < w[0].cost {
                    return Err(Error::validation(at("startup_cost_fn"), "steps must increase in hours and cost"));
                }
            }
        }
        let mut wind_ids = HashSet::new();
        for w in &self.wind_generators {
            let at = |field: &str| format!("wind_generators[id={}].{field}", w.id);
            if !wind_ids.insert(w.id) {
                return Err(Error::validation(at("id"), "duplicate wind generator id"));
            }
            if !bus_ids.contains(&w.bus) {
                return Err(Error::validation(at("bus"), format!("missing bus {}", w.bus)));
            }
            if !(w.capacity_mw >= 0.0 && w.capacity_mw.is_finite()) {
                return Err(Error::validation(at("capacity_MW"), "must be finite and >= 0"));
            }
        }
        if self.reference_buses.is_empty() {
            return Err(Error::validation("reference_buses", "at least one reference bus required"));
        }
        if let Some(r) = self.reference_buses.iter().find(|r| !bus_ids.contains(r)) {
            return Err(Error::validation("reference_buses", format!("missing bus {r}")));
        }
        if !(self.prices.voll >= 0.0 && self.prices.wind_curtail_price >= 0.0) {
            return Err(Error::validation("prices", "prices must be >= 0"));
        }
        Ok(())
    }
}

pub fn parse_case(text: &str, what: &str) -> Result<GridCase> {
    let case: GridCase = serde_json::from_str(text).map_err(|e| Error::parse(what, e))?;
    case.validate()?;
    Ok(case)
}

pub fn load_case(path: &Path) -> Result<GridCase> {
    let text = read_to_string(path)?;
    parse_case(&text, &path.display().to_string())
}

/// Case files shipped with the crate, by stem.
pub fn bundled_case(name: &str) -> Result<GridCase> {
    let text = match name {
        "toy5" => include_str!("../data/cases/toy5.case"),
        "rts79" => include_str!("../data/cases/rts79.case"),
        "rts96" => include_str!("../data/cases/rts96.case"),
        other => return Err(Error::validation("case", format!("no bundled case named {other}"))),
    };
    parse_case(text, &format!("{name}.case"))
}

/// Line in/out-of-service vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub line_status: Vec<bool>,
}

impl Topology {
    pub fn all_in_service(n_lines: usize) -> Self {
        Self { line_status: vec![true; n_lines] }
    }

    /// All lines in service except the given positions.
    pub fn with_out(n_lines: usize, out: &[usize]) -> Self {
        let mut t = Self::all_in_service(n_lines);
        for &l in out {
            t.line_status[l] = false;
        }
        t
    }

    pub fn len(&self) -> usize {
        self.line_status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.line_status.is_empty()
    }

    pub fn in_service(&self, line: usize) -> bool {
        self.line_status[line]
    }

    pub fn out_of_service(&self) -> Vec<usize> {
        (0..self.len()).filter(|&l| !self.line_status[l]).collect()
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        if self.len() != case.n_lines() {
            return Err(Error::validation(
                "topology",
                format!("{} entries for {} lines", self.len(), case.n_lines()),
            ));
        }
        Ok(())
    }
}

/// Connected component label of every bus under `topology`, labels in order
/// of first appearance.
pub fn bus_components(case: &GridCase, topology: &Topology) -> Vec<usize> {
    let n = case.n_buses();
    let mut adj = vec![Vec::new(); n];
    for (l, &(f, t)) in case.line_endpoints().iter().enumerate() {
        if topology.in_service(l) {
            adj[f].push(t);
            adj[t].push(f);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for &o in &adj[b] {
                if label[o] == usize::MAX {
                    label[o] = next;
                    queue.push_back(o);
                }
            }
        }
        next += 1;
    }
    label
}

/// DC power-flow coefficients. Flows are `b_f·θ + p_f_shift`, nodal
/// injections `b_bus·θ + p_bus_shift + g_sh`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcMatrices {
    pub b_bus: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub p_bus_shift: DVector<f64>,
    pub p_f_shift: DVector<f64>,
    pub g_sh: DVector<f64>,
}

impl DcMatrices {
    pub fn flows(&self, angles: &DVector<f64>) -> DVector<f64> {
        &self.b_f * angles + &self.p_f_shift
    }

    pub fn injections(&self, angles: &DVector<f64>) -> DVector<f64> {
        &self.b_bus * angles + &self.p_bus_shift + &self.g_sh
    }
}

/// Builds the DC matrices from in-service lines only.
pub fn dc_matrices(case: &GridCase, topology: &Topology) -> Result<DcMatrices> {
    topology.check(case)?;
    let comps = bus_components(case, topology);
    let ref_comps: HashSet<usize> = case.reference_positions().iter().map(|&r| comps[r]).collect();
    if let Some(b) = case.buses.iter().enumerate().find(|(i, b)| b.peak_load_mw > 0.0 && !ref_comps.contains(&comps[*i])) {
        return Err(Error::SingularTopology { bus: b.1.id });
    }
    Ok(dc_matrices_unchecked(case, topology))
}

/// [`dc_matrices`] without the islanding check.
pub fn dc_matrices_unchecked(case: &GridCase, topology: &Topology) -> DcMatrices {
    let n = case.n_buses();
    let nl = case.n_lines();
    let mut b_bus = DMatrix::zeros(n, n);
    let mut b_f = DMatrix::zeros(nl, n);
    for (l, (line, &(f, t))) in case.lines.iter().zip(case.line_endpoints().iter()).enumerate() {
        if !topology.in_service(l) {
            continue;
        }
        let b = 1.0 / line.reactance_pu;
        b_f[(l, f)] = b;
        b_f[(l, t)] = -b;
        b_bus[(f, f)] += b;
        b_bus[(t, t)] += b;
        b_bus[(f, t)] -= b;
        b_bus[(t, f)] -= b;
    }
    DcMatrices {
        b_bus,
        b_f,
        p_bus_shift: DVector::zeros(n),
        p_f_shift: DVector::zeros(nl),
        g_sh: DVector::zeros(n),
    }
}

/// Edits applied to a case before an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "args", rename_all = "snake_case")]
pub enum Modification {
    RemoveLine { line: u32 },
    /// Moves the whole peak load of `from_bus` onto `to_bus`.
    MoveLoad { from_bus: u32, to_bus: u32 },
    ScaleLoad { bus: u32, factor: f64 },
}

pub type ModificationList = Vec<Modification>;

pub fn parse_modifications(text: &str, what: &str) -> Result<ModificationList> {
    serde_json::from_str(text).map_err(|e| Error::parse(what, e))
}

pub fn load_modifications(path: &Path) -> Result<ModificationList> {
    parse_modifications(&read_to_string(path)?, &path.display().to_string())
}

pub fn bundled_modifications(name: &str) -> Result<ModificationList> {
    let text = match name {
        "rts79-bottleneck" => include_str!("../data/cases/rts79-bottleneck.mods"),
        "rts96-bottleneck" => include_str!("../data/cases/rts96-bottleneck.mods"),
        other => return Err(Error::validation("modifications", format!("no bundled list named {other}"))),
    };
    parse_modifications(text, &format!("{name}.mods"))
}

/// Returns a modified copy of `case`; the input is left untouched.
pub fn apply_modifications(case: &GridCase, mods: &[Modification]) -> Result<GridCase> {
    let mut out = case.clone();
    for (k, m) in mods.iter().enumerate() {
        let bus_pos = |c: &GridCase, id: u32, field: &str| {
            c.bus_index(id).ok_or_else(|| Error::validation(format!("mods[{k}].args.{field}"), format!("no bus {id}")))
        };
        match *m {
            Modification::RemoveLine { line } => {
                let idx = out
                    .line_index(line)
                    .ok_or_else(|| Error::validation(format!("mods[{k}].args.line"), format!("no line {line}")))?;
                out.lines.remove(idx);
            }
            Modification::MoveLoad { from_bus, to_bus } => {
                let f = bus_pos(&out, from_bus, "from_bus")?;
                let t = bus_pos(&out, to_bus, "to_bus")?;
                let load = out.buses[f].peak_load_mw;
                out.buses[f].peak_load_mw = 0.0;
                out.buses[t].peak_load_mw += load;
            }
            Modification::ScaleLoad { bus, factor } => {
                let b = bus_pos(&out, bus, "bus")?;
                if !(factor.is_finite() && factor >= 0.0) {
                    return Err(Error::validation(format!("mods[{k}].args.factor"), "must be finite and >= 0"));
                }
                out.buses[b].peak_load_mw *= factor;
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Aggregate load per bus id, for reporting.
pub fn loads_by_bus(case: &GridCase) -> BTreeMap<u32, f64> {
    case.buses.iter().map(|b| (b.id, b.peak_load_mw)).collect()
}
