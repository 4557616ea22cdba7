//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row `a·x (rel) b` becomes `a·x + s = b` with the slack bounds
//! encoding the relation, so bounds and ranges never add rows. Phase 1
//! minimizes the sum of artificials attached to rows whose slack cannot
//! absorb the initial residual.

use std::sync::Arc;

use crate::problem::{LinearProgram, Relation, Solution, Status};
use crate::MilpError;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
/// Smallest pivot the Harris and dual ratio tests accept.
const STABLE_PIVOT_TOL: f64 = 1e-7;
/// Basic bound violation left after refinement that triggers a dual cleanup.
const CLEANUP_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const ZERO_FLUSH: f64 = 1e-13;
/// Degenerate pivots tolerated under Dantzig pricing before Bland takes over.
const DEGENERATE_STREAK: usize = 30;
const REFRESH_EVERY: usize = 100;

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variable.
    #[default]
    Bland,
    /// Most negative reduced cost; falls back to Bland during degenerate
    /// stalls so termination is still guaranteed.
    Dantzig,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LpOptions {
    pub pivot_rule: PivotRule,
    /// Overrides the default cap of `50 · (n_vars + n_constraints)` pivots.
    pub iteration_cap: Option<usize>,
}

/// Solves `lp` with default options.
pub fn solve_lp(lp: &LinearProgram) -> Result<Solution, MilpError> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &LpOptions) -> Result<Solution, MilpError> {
    lp.validate()?;
    solve_validated(lp, &lp.bounds, opts)
}

/// Solves `lp` with `bounds` replacing its own; used by branch-and-bound.
pub(crate) fn solve_validated(
    lp: &LinearProgram,
    bounds: &[(f64, f64)],
    opts: &LpOptions,
) -> Result<Solution, MilpError> {
    solve_keep(lp, bounds, opts).map(|(sol, _)| sol)
}

/// Final tableau of an optimal solve, reusable as a warm start.
#[derive(Clone)]
pub(crate) struct WarmStart(Tableau);

impl WarmStart {
    pub(crate) fn size(&self) -> usize {
        self.0.t.len()
    }
}

/// Like [`solve_validated`], also returning the optimal tableau.
pub(crate) fn solve_keep(
    lp: &LinearProgram,
    bounds: &[(f64, f64)],
    opts: &LpOptions,
) -> Result<(Solution, Option<WarmStart>), MilpError> {
    let n = lp.num_vars();
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok((Solution::infeasible(n), None));
    }
    let cap = opts.iteration_cap.unwrap_or(50 * (n + lp.num_constraints()).max(1));
    let mut tab = Tableau::build(lp, bounds, opts.pivot_rule, cap);

    if tab.n_art > 0 {
        let mut phase1 = vec![0.0; tab.nc];
        for c in &mut phase1[tab.n + tab.m..] {
            *c = 1.0;
        }
        tab.run(&phase1)?;
        let infeas: f64 = (tab.n + tab.m..tab.nc).map(|j| tab.x[j]).sum();
        if infeas > PHASE1_TOL {
            return Ok((Solution::infeasible(n), None));
        }
        for j in tab.n + tab.m..tab.nc {
            tab.lo[j] = 0.0;
            tab.hi[j] = 0.0;
            tab.x[j] = 0.0;
        }
    }

    let mut cost = vec![0.0; tab.nc];
    cost[..n].copy_from_slice(&lp.objective);
    if tab.run(&cost)? == Outcome::Unbounded {
        return Ok((Solution::unbounded(n), None));
    }
    tab.cost = cost;
    Ok((tab.solution(lp), Some(WarmStart(tab))))
}

/// Re-solves from `warm` after the column bounds changed to `bounds`: the
/// old basis stays dual feasible, so a dual simplex restores primal
/// feasibility. Falls back to a cold solve if the dual phase stalls.
pub(crate) fn resolve(
    lp: &LinearProgram,
    warm: &WarmStart,
    bounds: &[(f64, f64)],
    opts: &LpOptions,
) -> Result<(Solution, Option<WarmStart>), MilpError> {
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok((Solution::infeasible(lp.num_vars()), None));
    }
    let mut tab = warm.0.clone();
    tab.iters = 0;
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        tab.lo[j] = lo;
        tab.hi[j] = hi;
        if tab.pos[j] == NONE {
            tab.x[j] = tab.x[j].clamp(lo, hi);
            if !tab.x[j].is_finite() {
                tab.x[j] = if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
            }
        }
    }
    let cost = std::mem::take(&mut tab.cost);
    tab.refresh(&cost);
    match tab.dual_run() {
        Ok(true) => {}
        // A dual proof of infeasibility is only as good as the tableau it
        // was read from; confirm it from scratch.
        Ok(false) | Err(_) => return solve_keep(lp, bounds, opts),
    }
    match tab.run(&cost) {
        Ok(Outcome::Optimal) => {
            tab.cost = cost;
            Ok((tab.solution(lp), Some(WarmStart(tab))))
        }
        Ok(Outcome::Unbounded) | Err(_) => solve_keep(lp, bounds, opts),
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

#[derive(Clone)]
struct Tableau {
    m: usize,
    n: usize,
    n_art: usize,
    nc: usize,
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    d: Vec<f64>,
    /// Transformed right-hand side B⁻¹b, kept to recompute basic values.
    beta: Vec<f64>,
    rule: PivotRule,
    iters: usize,
    cap: usize,
    pivot_row: Vec<(usize, f64)>,
    /// Phase-2 costs, kept with a finished tableau for warm starts.
    cost: Vec<f64>,
    /// Original rows over all columns (slacks and artificials included),
    /// scaled like the tableau; used to refine basic values.
    rows: Arc<Vec<Vec<(usize, f64)>>>,
    rhs: Arc<Vec<f64>>,
    /// Coefficient of each row's slack, ±1.
    sigma: Arc<Vec<f64>>,
}

impl Tableau {
    fn build(lp: &LinearProgram, bounds: &[(f64, f64)], rule: PivotRule, cap: usize) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();

        let mut x = Vec::with_capacity(n + 2 * m);
        for &(lo, hi) in bounds {
            x.push(if lo.is_finite() {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                0.0
            });
        }

        // Decide per row whether the slack can start basic.
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        let mut slack_val = Vec::with_capacity(m);
        let mut art_sign = vec![0.0; m];
        let mut art_val = vec![0.0; m];
        for (i, row) in lp.constraints.iter().enumerate() {
            let (slo, shi) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            let r = row.rhs - row.activity(&x);
            let sv = r.clamp(slo, shi);
            let excess = r - sv;
            if excess != 0.0 {
                art_sign[i] = excess.signum();
                art_val[i] = excess.abs();
            }
            slack_lo.push(slo);
            slack_hi.push(shi);
            slack_val.push(sv);
        }
        let n_art = art_sign.iter().filter(|s| **s != 0.0).count();
        let nc = n + m + n_art;

        let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        lo.extend_from_slice(&slack_lo);
        hi.extend_from_slice(&slack_hi);
        x.extend_from_slice(&slack_val);

        let mut t = vec![0.0; m * nc];
        let mut basis = vec![NONE; m];
        let mut pos = vec![NONE; nc];
        let mut beta = vec![0.0; m];
        let mut rows = Vec::with_capacity(m);
        let mut sigmas = Vec::with_capacity(m);
        let mut next_art = n + m;
        for (i, row) in lp.constraints.iter().enumerate() {
            let sigma = if art_sign[i] != 0.0 { art_sign[i] } else { 1.0 };
            let base = i * nc;
            for &(j, a) in &row.coeffs {
                t[base + j] += sigma * a;
            }
            t[base + n + i] = sigma;
            beta[i] = sigma * row.rhs;
            let mut orig: Vec<(usize, f64)> = row.coeffs.iter().map(|&(j, a)| (j, sigma * a)).collect();
            orig.push((n + i, sigma));
            sigmas.push(sigma);
            if art_sign[i] != 0.0 {
                let a = next_art;
                next_art += 1;
                orig.push((a, 1.0));
                t[base + a] = 1.0;
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push(art_val[i]);
                basis[i] = a;
                pos[a] = i;
            } else {
                basis[i] = n + i;
                pos[n + i] = i;
            }
            rows.push(orig);
        }
        let rhs = beta.clone();

        Self {
            m,
            n,
            n_art,
            nc,
            t,
            lo,
            hi,
            x,
            basis,
            pos,
            d: vec![0.0; nc],
            beta,
            rule,
            iters: 0,
            cap,
            pivot_row: Vec::with_capacity(nc),
            cost: Vec::new(),
            rows: Arc::new(rows),
            rhs: Arc::new(rhs),
            sigma: Arc::new(sigmas),
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.nc..(i + 1) * self.nc];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn solution(&self, lp: &LinearProgram) -> Solution {
        let values: Vec<f64> = self.x[..self.n].to_vec();
        let duals = (0..self.m).map(|i| -self.d[self.n + i]).collect();
        Solution { status: Status::Optimal, objective: lp.objective_value(&values), values, duals }
    }

    /// Dual simplex from a dual-feasible basis. Returns false when a row
    /// proves primal infeasibility.
    fn dual_run(&mut self) -> Result<bool, MilpError> {
        loop {
            // Leaving row: largest bound violation, lowest row on ties.
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let (viol, target) = if self.x[b] < self.lo[b] - FEAS_TOL {
                    (self.lo[b] - self.x[b], self.lo[b])
                } else if self.x[b] > self.hi[b] + FEAS_TOL {
                    (self.x[b] - self.hi[b], self.hi[b])
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, v, _)| viol > v) {
                    leave = Some((i, viol, target));
                }
            }
            let Some((r, _, target)) = leave else {
                return Ok(true);
            };
            if self.iters >= self.cap {
                return Err(MilpError::Numerical { cap: self.cap });
            }
            self.iters += 1;
            let b = self.basis[r];
            // x_b moves by −t_rj·Δx_j; it must rise when below its bound.
            let up = target > self.x[b];
            let row = r * self.nc;
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..self.nc {
                if self.pos[j] != NONE || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.t[row + j];
                if a.abs() <= STABLE_PIVOT_TOL {
                    continue;
                }
                // Direction x_j must move for x_b to move the right way.
                let s = if up == (a < 0.0) { 1.0 } else { -1.0 };
                let movable = if s > 0.0 { self.x[j] < self.hi[j] } else { self.x[j] > self.lo[j] };
                if !movable {
                    continue;
                }
                let ratio = (self.d[j] * s).max(0.0) / a.abs();
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba),
                };
                if better {
                    best = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = best else {
                return Ok(false);
            };
            let dq = (self.x[b] - target) / self.t[row + q];
            for i in 0..self.m {
                let a = self.t[i * self.nc + q];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * dq;
                }
            }
            self.x[q] += dq;
            self.x[b] = target;
            self.pivot(r, q);
        }
    }

    /// Recomputes basic values from B⁻¹b and the nonbasic values, and the
    /// reduced costs from the tableau, discarding accumulated drift.
    fn refresh(&mut self, cost: &[f64]) {
        for i in 0..self.m {
            let row = &self.t[i * self.nc..(i + 1) * self.nc];
            let mut v = self.beta[i];
            for (j, &tij) in row.iter().enumerate() {
                if tij != 0.0 && self.pos[j] == NONE {
                    v -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
        self.refine();
        self.price(cost);
    }

    /// One step of iterative refinement: the residual of the original rows
    /// is mapped through B⁻¹, which the slack columns of the tableau hold.
    fn refine(&mut self) {
        let r: Vec<f64> = self
            .rows
            .iter()
            .zip(self.rhs.iter())
            .zip(self.sigma.iter())
            .map(|((row, &b), &s)| (b - row.iter().map(|&(j, a)| a * self.x[j]).sum::<f64>()) * s)
            .collect();
        if r.iter().all(|v| v.abs() <= ZERO_FLUSH) {
            return;
        }
        for k in 0..self.m {
            let row = &self.t[k * self.nc + self.n..k * self.nc + self.n + self.m];
            let dx: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[k]] += dx;
        }
    }

    /// Largest bound violation among basic variables.
    fn basic_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| (self.lo[b] - self.x[b]).max(self.x[b] - self.hi[b]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.nc {
            if self.pos[j] != NONE || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -OPT_TOL && self.x[j] < self.hi[j] {
                1.0
            } else if dj > OPT_TOL && self.x[j] > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome, MilpError> {
        self.price(cost);
        let mut degenerate = 0usize;
        loop {
            let bland = match self.rule {
                PivotRule::Bland => true,
                PivotRule::Dantzig => degenerate >= DEGENERATE_STREAK,
            };
            if self.iters % REFRESH_EVERY == 0 {
                self.refresh(cost);
            }
            let Some((q, dir)) = self.entering(bland) else {
                // Confirm optimality against freshly recomputed values; a
                // refined point that left its bounds is repaired by the dual
                // simplex, which keeps the basis optimal.
                self.refresh(cost);
                if self.entering(bland).is_some() {
                    continue;
                }
                if self.basic_violation() <= CLEANUP_TOL {
                    return Ok(Outcome::Optimal);
                }
                if !self.dual_run()? {
                    return Err(MilpError::Numerical { cap: self.cap });
                }
                self.refresh(cost);
                continue;
            };
            if self.iters >= self.cap {
                return Err(MilpError::Numerical { cap: self.cap });
            }
            self.iters += 1;

            let flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };
            let (step, leave) = if bland { self.ratio_bland(q, dir, flip) } else { self.ratio_harris(q, dir, flip) };
            if step == f64::INFINITY {
                return Ok(Outcome::Unbounded);
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            if step > 0.0 {
                for i in 0..self.m {
                    let a = self.t[i * self.nc + q];
                    if a != 0.0 {
                        self.x[self.basis[i]] -= a * dir * step;
                    }
                }
            }
            match leave {
                None => {
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, bound)) => {
                    self.x[q] += dir * step;
                    let b = self.basis[r];
                    self.x[b] = bound;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn leave_limit(&self, i: usize, q: usize, dir: f64, slack: f64, tol: f64) -> Option<(f64, f64, f64)> {
        let a = self.t[i * self.nc + q] * dir;
        if a.abs() <= tol {
            return None;
        }
        let b = self.basis[i];
        if a > 0.0 {
            self.lo[b].is_finite().then(|| ((self.x[b] - self.lo[b] + slack) / a, self.lo[b], a))
        } else {
            self.hi[b].is_finite().then(|| ((self.hi[b] - self.x[b] + slack) / -a, self.hi[b], a))
        }
    }

    /// Minimum ratio, ties to the smallest basic index; a tie with the
    /// entering variable's own bound flip keeps the flip.
    fn ratio_bland(&self, q: usize, dir: f64, flip: f64) -> (f64, Option<(usize, f64)>) {
        let mut step = flip;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let Some((lim, bound, _)) = self.leave_limit(i, q, dir, 0.0, PIVOT_TOL) else { continue };
            let lim = lim.max(0.0);
            let better = if lim < step - 1e-12 {
                true
            } else if lim <= step + 1e-12 {
                leave.is_some_and(|(r, _)| self.basis[i] < self.basis[r])
            } else {
                false
            };
            if better {
                step = lim;
                leave = Some((i, bound));
            }
        }
        (step, leave)
    }

    /// Harris two-pass test: bound the step with tolerance-relaxed limits,
    /// then take the largest pivot among rows within that bound.
    fn ratio_harris(&self, q: usize, dir: f64, flip: f64) -> (f64, Option<(usize, f64)>) {
        let mut relaxed = f64::INFINITY;
        for i in 0..self.m {
            if let Some((lim, _, _)) = self.leave_limit(i, q, dir, FEAS_TOL, STABLE_PIVOT_TOL) {
                relaxed = relaxed.min(lim);
            }
        }
        if flip <= relaxed {
            return (flip, None);
        }
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for i in 0..self.m {
            let Some((lim, bound, a)) = self.leave_limit(i, q, dir, 0.0, STABLE_PIVOT_TOL) else { continue };
            if lim <= relaxed && best.is_none_or(|(_, _, _, ba)| a.abs() > ba) {
                best = Some((i, bound, lim, a.abs()));
            }
        }
        match best {
            Some((i, bound, lim, _)) => (lim.max(0.0), Some((i, bound))),
            None => (f64::INFINITY, None),
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.t[r * nc + q];
        self.pivot_row.clear();
        for j in 0..nc {
            let v = self.t[r * nc + j];
            if v != 0.0 {
                let v = v / piv;
                self.t[r * nc + j] = v;
                self.pivot_row.push((j, v));
            }
        }
        self.t[r * nc + q] = 1.0;
        let br = self.beta[r] / piv;
        self.beta[r] = br;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for &(j, v) in &self.pivot_row {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < ZERO_FLUSH { 0.0 } else { nv };
            }
            row[q] = 0.0;
            self.beta[i] -= f * br;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, v) in &self.pivot_row {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;

        let old = self.basis[r];
        self.pos[old] = NONE;
        self.basis[r] = q;
        self.pos[q] = r;
    }
}
