//! Best-first branch-and-bound over binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::problem::{MixedIntegerProgram, Solution, Status};
use crate::simplex::{resolve, solve_keep, LpOptions, WarmStart};
use crate::MilpError;

/// Tableaus above this many entries are not kept for warm starts.
const WARM_START_MAX_ENTRIES: usize = 4_000_000;

/// Binary values within this distance of 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-7;
/// Row violation above which a warm-started node is solved again from scratch.
const NODE_FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct MilpOptions {
    /// Relative optimality gap; nodes whose bound is within
    /// `gap_tol · |incumbent|` of the incumbent are pruned.
    pub gap_tol: f64,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-6, lp: LpOptions::default() }
    }
}

/// Search statistics of a branch-and-bound run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BnbStats {
    /// LP relaxations solved, root included.
    pub nodes: usize,
    /// Objective of each successive incumbent, in discovery order.
    pub incumbents: Vec<f64>,
}

pub fn solve_milp(mip: &MixedIntegerProgram, gap_tol: f64) -> Result<Solution, MilpError> {
    solve_milp_with(mip, &MilpOptions { gap_tol, ..MilpOptions::default() }).map(|(s, _)| s)
}

struct Node {
    bound: f64,
    id: usize,
    bounds: Vec<(f64, f64)>,
    sol: Solution,
    warm: Option<WarmStart>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn most_fractional(mip: &MixedIntegerProgram, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in &mip.binary_vars {
        let frac = (values[j] - values[j].floor()).min(values[j].ceil() - values[j]);
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        // Strictly greater keeps the lowest index among ties.
        if best.is_none_or(|(bj, bf)| frac > bf + 1e-12 || (frac >= bf - 1e-12 && j < bj)) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

pub fn solve_milp_with(
    mip: &MixedIntegerProgram,
    opts: &MilpOptions,
) -> Result<(Solution, BnbStats), MilpError> {
    mip.validate()?;
    if opts.gap_tol.is_nan() || opts.gap_tol < 0.0 {
        return Err(MilpError::Invalid(format!("gap tolerance {} must be >= 0", opts.gap_tol)));
    }
    let n = mip.lp.num_vars();
    let mut stats = BnbStats::default();

    let root_bounds = mip.lp.bounds.clone();
    let (root, warm) = solve_keep(&mip.lp, &root_bounds, &opts.lp)?;
    let keep = |w: Option<WarmStart>| w.filter(|w| w.size() <= WARM_START_MAX_ENTRIES);
    stats.nodes += 1;
    match root.status {
        Status::Infeasible => return Ok((root, stats)),
        Status::Unbounded => return Ok((root, stats)),
        Status::Optimal => {}
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node { bound: root.objective, id: next_id, bounds: root_bounds, sol: root, warm: keep(warm) });
    next_id += 1;

    let mut incumbent: Option<Solution> = None;
    let prunable = |bound: f64, inc: &Option<Solution>| -> bool {
        inc.as_ref().is_some_and(|s| bound >= s.objective - opts.gap_tol * s.objective.abs() - 1e-9)
    };

    while let Some(node) = heap.pop() {
        if prunable(node.bound, &incumbent) {
            continue;
        }
        let Some(j) = most_fractional(mip, &node.sol.values) else {
            let mut sol = node.sol;
            for &b in &mip.binary_vars {
                sol.values[b] = sol.values[b].round();
            }
            sol.objective = mip.lp.objective_value(&sol.values);
            if incumbent.as_ref().is_none_or(|inc| sol.objective < inc.objective) {
                stats.incumbents.push(sol.objective);
                incumbent = Some(sol);
            }
            continue;
        };
        for fixed in [0.0, 1.0] {
            let mut bounds = node.bounds.clone();
            bounds[j] = (fixed, fixed);
            let (mut sol, mut warm) = match &node.warm {
                Some(w) => resolve(&mip.lp, w, &bounds, &opts.lp)?,
                None => solve_keep(&mip.lp, &bounds, &opts.lp)?,
            };
            if node.warm.is_some() && sol.status == Status::Optimal && mip.lp.max_violation(&sol.values) > NODE_FEAS_TOL {
                (sol, warm) = solve_keep(&mip.lp, &bounds, &opts.lp)?;
            }
            stats.nodes += 1;
            if sol.status != Status::Optimal || prunable(sol.objective, &incumbent) {
                continue;
            }
            heap.push(Node { bound: sol.objective, id: next_id, bounds, sol, warm: keep(warm) });
            next_id += 1;
        }
    }

    Ok((incumbent.unwrap_or_else(|| Solution::infeasible(n)), stats))
}
