//! Bounded-variable revised simplex.
//!
//! Rows are stored as `a_i x + s_i = 0` with the logical `s_i` carrying the
//! row bounds (`lo <= a_i x <= hi` becomes `-hi <= s_i <= -lo`). Each row is
//! scaled so its largest coefficient is 1. The basis inverse is kept in
//! product form (a list of eta columns) and rebuilt every few dozen updates.
//!
//! Primal iterations use a composite objective: while some basic variable is
//! out of bounds the sum of infeasibilities is minimized, otherwise the true
//! cost. Dual iterations are used when the current basis is dual feasible,
//! which is the common case after bound changes or added rows in
//! branch-and-bound. Dantzig pricing falls back to Bland's rule after a run
//! of degenerate pivots.

#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model_ir::{Model, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit or numerical breakdown; no claim is made.
    Failed,
    /// The deadline passed before the solve finished.
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals: `d objective / d rhs` in the caller's row units.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LpTolerances {
    pub primal: f64,
    pub dual: f64,
    pub pivot: f64,
}

impl Default for LpTolerances {
    fn default() -> Self {
        LpTolerances { primal: 1e-8, dual: 1e-9, pivot: 1e-9 }
    }
}

#[derive(Debug, Clone)]
struct Eta {
    p: usize,
    piv: f64,
    others: Vec<(usize, f64)>,
}

const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    row_w: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    etas: Vec<Eta>,
    base_etas: usize,
    dirty: bool,
    pub tol: LpTolerances,
    pub iterations: usize,
    pub max_iterations: Option<usize>,
    pub deadline: Option<Instant>,
}

impl LpSolver {
    /// An LP with `n` structural columns and no rows.
    pub fn new(cost: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = cost.len();
        assert_eq!(lower.len(), n);
        assert_eq!(upper.len(), n);
        let mut s = LpSolver {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            row_w: Vec::new(),
            cost,
            lo: lower,
            up: upper,
            status: vec![VarStatus::AtLower; n],
            head: Vec::new(),
            x: vec![0.0; n],
            etas: Vec::new(),
            base_etas: 0,
            dirty: true,
            tol: LpTolerances::default(),
            iterations: 0,
            max_iterations: None,
            deadline: None,
        };
        for j in 0..n {
            s.status[j] = s.resting_status(j);
            s.x[j] = s.resting_value(j);
        }
        s
    }

    /// Continuous relaxation of `model` without its cone rows.
    pub fn from_model(model: &Model) -> Self {
        let n = model.num_vars();
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective.terms {
            cost[v.0] += c;
        }
        let lower = model.variables.iter().map(|v| v.lower).collect();
        let upper = model.variables.iter().map(|v| v.upper).collect();
        let mut lp = LpSolver::new(cost, lower, upper);
        for row in &model.linear {
            let terms: Vec<(usize, f64)> = row.terms.iter().map(|&(v, c)| (v.0, c)).collect();
            let (lo, hi) = sense_bounds(row.sense, row.rhs);
            lp.add_row(&terms, lo, hi);
        }
        lp
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    fn resting_status(&self, j: usize) -> VarStatus {
        if self.lo[j].is_finite() {
            VarStatus::AtLower
        } else if self.up[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn resting_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.up[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    /// Appends `lo <= sum(terms) <= hi`; the new logical starts basic.
    pub fn add_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) {
        let wmax = terms.iter().fold(0.0f64, |a, &(_, c)| a.max(c.abs()));
        let w = if wmax > 0.0 { 1.0 / wmax } else { 1.0 };
        let i = self.m;
        let mut act = 0.0;
        for &(j, c) in terms {
            if c != 0.0 {
                self.cols[j].push((i, c * w));
                act += c * w * self.x[j];
            }
        }
        self.m += 1;
        self.row_w.push(w);
        self.lo.push(-hi * w);
        self.up.push(-lo * w);
        self.status.push(VarStatus::Basic);
        self.x.push(-act);
        self.dirty = true;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lo[j] = lo;
        self.up[j] = up;
        if self.status[j] != VarStatus::Basic {
            self.status[j] = match self.status[j] {
                VarStatus::AtUpper if up.is_finite() => VarStatus::AtUpper,
                _ => self.resting_status(j),
            };
            self.x[j] = self.resting_value(j);
        }
        self.dirty = true;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }

    pub fn basis(&self) -> Vec<VarStatus> {
        self.status.clone()
    }

    /// Installs a basis saved earlier; rows added since then get basic logicals.
    pub fn set_basis(&mut self, basis: &[VarStatus]) {
        let saved_m = basis.len() - self.n;
        self.status[..self.n].copy_from_slice(&basis[..self.n]);
        for i in 0..self.m {
            self.status[self.n + i] = if i < saved_m { basis[self.n + i] } else { VarStatus::Basic };
        }
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                if (self.status[j] == VarStatus::AtLower && !self.lo[j].is_finite())
                    || (self.status[j] == VarStatus::AtUpper && !self.up[j].is_finite())
                {
                    self.status[j] = self.resting_status(j);
                }
                self.x[j] = self.resting_value(j);
            }
        }
        self.dirty = true;
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * v[i]).sum()
        } else {
            v[j - self.n]
        }
    }

    fn dense_col(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                v[i] = a;
            }
        } else {
            v[j - self.n] = 1.0;
        }
        v
    }

    fn ftran(&self, v: &mut [f64]) {
        for e in &self.etas {
            let a = v[e.p];
            if a != 0.0 {
                v[e.p] = a * e.piv;
                for &(i, c) in &e.others {
                    v[i] += a * c;
                }
            }
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = v[e.p] * e.piv;
            for &(i, c) in &e.others {
                s += c * v[i];
            }
            v[e.p] = s;
        }
    }

    fn push_eta(&mut self, w: &[f64], p: usize) {
        let d = w[p];
        let others = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != p && v.abs() > 1e-14)
            .map(|(i, &v)| (i, -v / d))
            .collect();
        self.etas.push(Eta { p, piv: 1.0 / d, others });
    }

    fn refactor(&mut self) {
        self.etas.clear();
        let total = self.n + self.m;
        self.head = vec![usize::MAX; self.m];
        let mut assigned = vec![false; self.m];
        let mut structural = Vec::new();
        for j in 0..total {
            if self.status[j] == VarStatus::Basic {
                if j >= self.n {
                    let i = j - self.n;
                    assigned[i] = true;
                    self.head[i] = j;
                } else {
                    structural.push(j);
                }
            }
        }
        structural.sort_by_key(|&j| (self.cols[j].len(), j));
        for j in structural {
            let mut v = self.dense_col(j);
            self.ftran(&mut v);
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            for (i, &val) in v.iter().enumerate() {
                if !assigned[i] && val.abs() > best_abs {
                    best_abs = val.abs();
                    best = i;
                }
            }
            if best == usize::MAX || best_abs < 1e-9 {
                // dependent column: drop it from the basis
                self.status[j] = self.resting_status(j);
                self.x[j] = self.resting_value(j);
                continue;
            }
            self.push_eta(&v, best);
            assigned[best] = true;
            self.head[best] = j;
        }
        for i in 0..self.m {
            if !assigned[i] {
                let j = self.n + i;
                self.status[j] = VarStatus::Basic;
                self.head[i] = j;
            }
        }
        self.base_etas = self.etas.len();
        self.recompute_xb();
        self.dirty = false;
    }

    fn recompute_xb(&mut self) {
        let mut r = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                let xj = self.x[j];
                if xj != 0.0 {
                    if j < self.n {
                        for &(i, a) in &self.cols[j] {
                            r[i] -= a * xj;
                        }
                    } else {
                        r[j - self.n] -= xj;
                    }
                }
            }
        }
        self.ftran(&mut r);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = r[p];
        }
    }

    fn cost_of(&self, j: usize) -> f64 {
        if j < self.n {
            self.cost[j]
        } else {
            0.0
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lo[j] - self.tol.primal {
            self.lo[j] - x
        } else if x > self.up[j] + self.tol.primal {
            x - self.up[j]
        } else {
            0.0
        }
    }

    fn duals_for(&self, phase1: bool) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (p, &j) in self.head.iter().enumerate() {
            y[p] = if phase1 {
                let x = self.x[j];
                if x < self.lo[j] - self.tol.primal {
                    -1.0
                } else if x > self.up[j] + self.tol.primal {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost_of(j)
            };
        }
        self.btran(&mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost_of(j) };
        c - self.col_dot(j, y)
    }

    fn limit(&self) -> usize {
        self.max_iterations.unwrap_or(50 * (self.n + self.m) + 5000)
    }

    fn is_dual_feasible(&self) -> bool {
        let y = self.duals_for(false);
        (0..self.n + self.m).all(|j| {
            let d = self.reduced_cost(j, &y, false);
            let t = self.tol.dual * 10.0;
            match self.status[j] {
                VarStatus::Basic => true,
                _ if self.lo[j] == self.up[j] => true,
                VarStatus::AtLower => d >= -t,
                VarStatus::AtUpper => d <= t,
                VarStatus::Free => d.abs() <= t,
            }
        })
    }

    pub fn solve(&mut self) -> LpSolution {
        let start_iters = self.iterations;
        for j in 0..self.n + self.m {
            if self.lo[j] > self.up[j] + self.tol.primal {
                return self.finish(LpStatus::Infeasible, start_iters);
            }
        }
        if self.dirty {
            self.refactor();
        }
        if self.is_dual_feasible() {
            match self.dual_loop() {
                Some(LpStatus::Infeasible) => return self.finish(LpStatus::Infeasible, start_iters),
                Some(s @ (LpStatus::Failed | LpStatus::Interrupted)) => return self.finish(s, start_iters),
                _ => {}
            }
        }
        let st = self.primal_loop();
        self.finish(st, start_iters)
    }

    fn finish(&mut self, status: LpStatus, start_iters: usize) -> LpSolution {
        let x = self.x[..self.n].to_vec();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        let duals = if status == LpStatus::Optimal && !self.dirty {
            let y = self.duals_for(false);
            y.iter().zip(&self.row_w).map(|(y, w)| y * w).collect()
        } else {
            vec![0.0; self.m]
        };
        LpSolution { status, x, objective, duals, iterations: self.iterations - start_iters }
    }

    fn past_deadline(&self, iteration: usize) -> bool {
        iteration % 32 == 31 && self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn after_pivot(&mut self) {
        if self.etas.len() - self.base_etas >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn primal_loop(&mut self) -> LpStatus {
        let limit = self.limit();
        let mut degenerate_run = 0usize;
        let mut local = 0usize;
        loop {
            if local >= limit {
                return LpStatus::Failed;
            }
            if self.past_deadline(local) {
                return LpStatus::Interrupted;
            }
            local += 1;
            let phase1 = (0..self.m).any(|p| self.infeasibility(self.head[p]) > 0.0);
            let y = self.duals_for(phase1);
            let bland = degenerate_run >= BLAND_AFTER;

            // pricing
            let mut enter = usize::MAX;
            let mut enter_dir = 0.0;
            let mut best = 0.0;
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase1);
                let dir = match st {
                    VarStatus::AtLower if d < -self.tol.dual => 1.0,
                    VarStatus::AtUpper if d > self.tol.dual => -1.0,
                    VarStatus::Free if d.abs() > self.tol.dual => -d.signum(),
                    _ => continue,
                };
                if bland {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    enter = j;
                    enter_dir = dir;
                }
            }
            if enter == usize::MAX {
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            }

            let mut w = self.dense_col(enter);
            self.ftran(&mut w);

            // ratio test, two passes
            let tolp = self.tol.primal;
            let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new(); // (pos, exact ratio, relaxed ratio, to_upper)
            for p in 0..self.m {
                let wp = w[p];
                if wp.abs() <= self.tol.pivot {
                    continue;
                }
                let j = self.head[p];
                let rate = -enter_dir * wp;
                let xj = self.x[j];
                if rate > 0.0 {
                    if phase1 && xj < self.lo[j] - tolp {
                        cands.push((p, (self.lo[j] - xj) / rate, (self.lo[j] + tolp - xj) / rate, false));
                    } else if self.up[j].is_finite() && xj <= self.up[j] + tolp {
                        cands.push((p, (self.up[j] - xj) / rate, (self.up[j] + tolp - xj) / rate, true));
                    }
                } else if phase1 && xj > self.up[j] + tolp {
                    cands.push((p, (self.up[j] - xj) / rate, (self.up[j] - tolp - xj) / rate, true));
                } else if self.lo[j].is_finite() && xj >= self.lo[j] - tolp {
                    cands.push((p, (self.lo[j] - xj) / rate, (self.lo[j] - tolp - xj) / rate, false));
                }
            }
            let flip = self.up[enter] - self.lo[enter];
            let mut leave: Option<(usize, f64, bool)> = None;
            if bland {
                let mut best_t = f64::INFINITY;
                let mut best_var = usize::MAX;
                for &(p, t, _, up) in &cands {
                    let t = t.max(0.0);
                    let j = self.head[p];
                    if t < best_t - 1e-12 || (t <= best_t + 1e-12 && j < best_var) {
                        best_t = t;
                        best_var = j;
                        leave = Some((p, t, up));
                    }
                }
            } else if !cands.is_empty() {
                let theta = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min).max(0.0);
                let mut best_abs = -1.0;
                for &(p, t, _, up) in &cands {
                    if t <= theta && w[p].abs() > best_abs {
                        best_abs = w[p].abs();
                        leave = Some((p, t.max(0.0), up));
                    }
                }
            }
            let step_leave = leave.map_or(f64::INFINITY, |l| l.1);
            if flip.is_finite() && flip <= step_leave {
                // bound flip of the entering variable
                let t = flip;
                for p in 0..self.m {
                    if w[p] != 0.0 {
                        let j = self.head[p];
                        self.x[j] -= enter_dir * t * w[p];
                    }
                }
                if enter_dir > 0.0 {
                    self.status[enter] = VarStatus::AtUpper;
                    self.x[enter] = self.up[enter];
                } else {
                    self.status[enter] = VarStatus::AtLower;
                    self.x[enter] = self.lo[enter];
                }
                self.iterations += 1;
                degenerate_run = 0;
                continue;
            }
            let Some((r, t, to_upper)) = leave else {
                if phase1 {
                    return LpStatus::Failed;
                }
                return LpStatus::Unbounded;
            };
            if t < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for p in 0..self.m {
                if w[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= enter_dir * t * w[p];
                }
            }
            self.x[enter] += enter_dir * t;
            let leaving = self.head[r];
            if to_upper {
                self.status[leaving] = VarStatus::AtUpper;
                self.x[leaving] = self.up[leaving];
            } else {
                self.status[leaving] = VarStatus::AtLower;
                self.x[leaving] = self.lo[leaving];
            }
            self.status[enter] = VarStatus::Basic;
            self.head[r] = enter;
            self.push_eta(&w, r);
            self.iterations += 1;
            self.after_pivot();
        }
    }

    /// Dual simplex from a dual-feasible basis. Returns `None` when dual
    /// feasibility is lost and the primal loop should take over.
    fn dual_loop(&mut self) -> Option<LpStatus> {
        let limit = self.limit();
        let mut local = 0usize;
        loop {
            if local >= limit {
                return Some(LpStatus::Failed);
            }
            if self.past_deadline(local) {
                return Some(LpStatus::Interrupted);
            }
            local += 1;
            // leaving row: largest infeasibility
            let mut r = usize::MAX;
            let mut worst = 0.0;
            for p in 0..self.m {
                let inf = self.infeasibility(self.head[p]);
                if inf > worst {
                    worst = inf;
                    r = p;
                }
            }
            if r == usize::MAX {
                return Some(LpStatus::Optimal);
            }
            let leaving = self.head[r];
            let below = self.x[leaving] < self.lo[leaving];
            let bound = if below { self.lo[leaving] } else { self.up[leaving] };

            let y = self.duals_for(false);
            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            self.btran(&mut rho);

            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new(); // (j, |d|, |alpha|, d)
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let alpha = self.col_dot(j, &rho);
                if alpha.abs() <= self.tol.pivot {
                    continue;
                }
                let ok = match st {
                    VarStatus::AtLower => (below && alpha < 0.0) || (!below && alpha > 0.0),
                    VarStatus::AtUpper => (below && alpha > 0.0) || (!below && alpha < 0.0),
                    VarStatus::Free => true,
                    VarStatus::Basic => false,
                };
                if ok {
                    let d = self.reduced_cost(j, &y, false);
                    if (st == VarStatus::AtLower && d < -10.0 * self.tol.dual)
                        || (st == VarStatus::AtUpper && d > 10.0 * self.tol.dual)
                    {
                        return None;
                    }
                    cands.push((j, d.abs(), alpha.abs(), d));
                }
            }
            if cands.is_empty() {
                if worst > 1e-7 {
                    return Some(LpStatus::Infeasible);
                }
                return None;
            }
            let theta = cands.iter().map(|c| (c.1 + self.tol.dual) / c.2).fold(f64::INFINITY, f64::min);
            let mut q = usize::MAX;
            let mut best_abs = -1.0;
            for &(j, dabs, aabs, _) in &cands {
                if dabs / aabs <= theta && aabs > best_abs {
                    best_abs = aabs;
                    q = j;
                }
            }

            let mut w = self.dense_col(q);
            self.ftran(&mut w);
            if w[r].abs() <= self.tol.pivot {
                self.refactor();
                continue;
            }
            let dq = (self.x[leaving] - bound) / w[r];
            for p in 0..self.m {
                if w[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= dq * w[p];
                }
            }
            self.x[q] += dq;
            self.x[leaving] = bound;
            self.status[leaving] = if below { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            self.push_eta(&w, r);
            self.iterations += 1;
            self.after_pivot();
        }
    }
}

pub fn sense_bounds(sense: Sense, rhs: f64) -> (f64, f64) {
    match sense {
        Sense::Le => (f64::NEG_INFINITY, rhs),
        Sense::Ge => (rhs, f64::INFINITY),
        Sense::Eq => (rhs, rhs),
    }
}

/// Solves the continuous relaxation of `model` (binaries relaxed to their
/// bounds, cones dropped).
pub fn solve_lp(model: &Model) -> LpSolution {
    LpSolver::from_model(model).solve()
}
