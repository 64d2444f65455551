use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, trace, warn};

use super::simplex::{sense_bounds, LpSolver, LpStatus, VarStatus};
use super::{relative_gap, Branching, LazyCuts, SolveResult, SolveStatus, SolverParams};
use crate::model_ir::{soc_linearization_cut, LinearConstraint, Model};

/// Rounds of cone separation allowed at an integral candidate.
const INTEGRAL_CUT_ROUNDS: usize = 400;
/// Relative cone violation that triggers a cut. Kept well above the LP
/// feasibility tolerance so that every emitted cut moves the LP point.
const CONE_TOL: f64 = 1e-7;
/// Relative row violation tolerated on an accepted incumbent.
const ACCEPT_TOL: f64 = 1e-6;

struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    /// Tightened `(var, lower, upper)` bounds, applied in order.
    fix: Vec<(usize, f64, f64)>,
    basis: Option<Arc<Vec<VarStatus>>>,
    branch: Option<(usize, bool, f64)>,
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
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Outcome {
    /// The deadline passed inside an LP.
    Interrupted,
    Infeasible,
    Pruned,
    Failed,
    Integral,
    Fractional(f64, Vec<f64>),
}

struct Engine<'a> {
    model: &'a Model,
    params: &'a SolverParams,
    lazy: &'a [&'a dyn LazyCuts],
    lp: LpSolver,
    /// Integer variables (binaries included).
    bins: Vec<usize>,
    /// Position of each variable in `bins`.
    slot: Vec<usize>,
    base: Vec<(f64, f64)>,
    obj_const: f64,
    ub: f64,
    incumbent: Option<Vec<f64>>,
    cuts: usize,
    trouble: bool,
    pc_sum: Vec<[f64; 2]>,
    pc_cnt: Vec<[u32; 2]>,
}

impl<'a> Engine<'a> {
    fn cutoff_tol(&self) -> f64 {
        self.params.abs_gap.max(self.params.rel_gap * self.ub.abs().max(1e-10))
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound >= self.ub - self.cutoff_tol()
    }

    fn apply(&mut self, fix: &[(usize, f64, f64)]) {
        let mut bounds = self.base.clone();
        for &(j, lo, up) in fix {
            let k = self.slot[j];
            bounds[k] = (bounds[k].0.max(lo), bounds[k].1.min(up));
        }
        for (k, &j) in self.bins.iter().enumerate() {
            if self.lp.bounds(j) != bounds[k] {
                self.lp.set_bounds(j, bounds[k].0, bounds[k].1);
            }
        }
    }

    fn is_integral(&self, x: &[f64]) -> bool {
        self.bins.iter().all(|&j| (x[j] - x[j].round()).abs() <= self.params.int_tol)
    }

    fn add_cut(&mut self, c: &LinearConstraint) {
        let terms: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a)).collect();
        let (lo, hi) = sense_bounds(c.sense, c.rhs);
        self.lp.add_row(&terms, lo, hi);
        self.cuts += 1;
    }

    fn cone_cuts(&self, x: &[f64]) -> Vec<LinearConstraint> {
        self.model
            .cones
            .iter()
            .filter_map(|k| {
                let scale = 1.0 + k.bound.eval(x).abs();
                soc_linearization_cut(k, x, CONE_TOL * scale)
            })
            .collect()
    }

    /// Solves the LP at the current bounds, separating cone and lazy cuts.
    fn evaluate(&mut self, mut budget: usize) -> Outcome {
        let mut integral_rounds = 0;
        loop {
            let sol = self.lp.solve();
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Outcome::Infeasible,
                LpStatus::Interrupted => return Outcome::Interrupted,
                LpStatus::Unbounded | LpStatus::Failed => {
                    warn!("LP relaxation ended with {:?}", sol.status);
                    return Outcome::Failed;
                }
            }
            let obj = sol.objective + self.obj_const;
            if self.prunable(obj) {
                return Outcome::Pruned;
            }
            let x = sol.x;
            let integral = self.is_integral(&x);
            if integral || budget > 0 {
                let cuts = self.cone_cuts(&x);
                if !cuts.is_empty() {
                    if integral {
                        integral_rounds += 1;
                        if integral_rounds > INTEGRAL_CUT_ROUNDS {
                            warn!("cone separation did not converge at an integral point");
                            return Outcome::Failed;
                        }
                    } else {
                        budget = budget.saturating_sub(cuts.len());
                    }
                    for c in &cuts {
                        self.add_cut(c);
                    }
                    continue;
                }
            }
            if !integral {
                return Outcome::Fractional(obj, x);
            }
            let mut lazy_cuts = Vec::new();
            for g in self.lazy {
                lazy_cuts.extend(g.separate(self.model, &x));
            }
            if !lazy_cuts.is_empty() {
                integral_rounds += 1;
                if integral_rounds > INTEGRAL_CUT_ROUNDS {
                    warn!("lazy separation did not converge at an integral point");
                    return Outcome::Failed;
                }
                for c in &lazy_cuts {
                    self.add_cut(c);
                }
                continue;
            }
            // a point integral only up to int_tol can hide big-M slack; when
            // exact rounding loses value the subtree stays open
            let polished = self.polish(&x);
            if polished.is_none() && self.lp.deadline.is_some_and(|d| Instant::now() >= d) {
                return Outcome::Interrupted;
            }
            let slack = self.cutoff_tol().max(1e-9 * (1.0 + obj.abs()));
            return match polished {
                Some(p) if p <= obj + slack => Outcome::Integral,
                _ if self.choose_branch(&x, 0.0) != usize::MAX => Outcome::Fractional(obj, x),
                Some(_) => Outcome::Integral,
                None => Outcome::Failed,
            };
        }
    }

    /// Fixes the integers of an integral point, re-solves, and records the
    /// result as incumbent when it is feasible and improving. Returns the
    /// objective of the polished point.
    fn polish(&mut self, x: &[f64]) -> Option<f64> {
        let saved: Vec<(usize, (f64, f64))> = self.bins.iter().map(|&j| (j, self.lp.bounds(j))).collect();
        for &j in &self.bins {
            let r = x[j].round();
            self.lp.set_bounds(j, r, r);
        }
        let mut rounds = 0;
        let result = loop {
            let sol = self.lp.solve();
            if sol.status != LpStatus::Optimal {
                break None;
            }
            let mut cuts = self.cone_cuts(&sol.x);
            if cuts.is_empty() {
                for g in self.lazy {
                    cuts.extend(g.separate(self.model, &sol.x));
                }
            }
            if cuts.is_empty() {
                break Some(sol);
            }
            rounds += 1;
            if rounds > INTEGRAL_CUT_ROUNDS {
                break None;
            }
            for c in &cuts {
                self.add_cut(c);
            }
        };
        for (j, (lo, up)) in saved {
            self.lp.set_bounds(j, lo, up);
        }
        let Some(sol) = result else {
            if self.lp.deadline.is_some_and(|d| Instant::now() >= d) {
                return None;
            }
            warn!("polishing an integral point failed");
            self.trouble = true;
            return None;
        };
        let mut vals = sol.x;
        for &j in &self.bins {
            vals[j] = vals[j].round();
        }
        if !self.acceptable(&vals) {
            warn!("integral point rejected: residual {:.3e}", self.model.max_violation(&vals));
            self.trouble = true;
            return None;
        }
        let obj = self.model.objective_value(&vals);
        if obj < self.ub {
            debug!("incumbent {obj:.9}");
            self.ub = obj;
            self.incumbent = Some(vals);
        }
        Some(obj)
    }

    fn acceptable(&self, x: &[f64]) -> bool {
        for (v, &xv) in self.model.variables.iter().zip(x) {
            if xv < v.lower - 1e-9 * (1.0 + v.lower.abs()) || xv > v.upper + 1e-9 * (1.0 + v.upper.abs()) {
                return false;
            }
        }
        for c in &self.model.linear {
            if c.violation(x) > ACCEPT_TOL * (1.0 + c.rhs.abs()) {
                return false;
            }
        }
        for k in &self.model.cones {
            if k.violation(x) > ACCEPT_TOL * (1.0 + k.bound.eval(x).abs()) {
                return false;
            }
        }
        for g in self.lazy {
            if !g.separate(self.model, x).is_empty() {
                return false;
            }
        }
        true
    }

    /// General integers (aggregate counts) go first, then binaries.
    fn choose_branch(&self, x: &[f64], tol: f64) -> usize {
        let mut best = usize::MAX;
        let mut best_score = -1.0;
        for (k, &j) in self.bins.iter().enumerate() {
            let f = x[j] - x[j].floor();
            let frac = f.min(1.0 - f);
            if frac <= tol {
                continue;
            }
            let score = match self.params.branching {
                Branching::MostFractional => frac,
                Branching::PseudoCost => {
                    let est = |d: usize| {
                        if self.pc_cnt[k][d] == 0 {
                            1.0
                        } else {
                            self.pc_sum[k][d] / f64::from(self.pc_cnt[k][d])
                        }
                    };
                    (est(0) * f).max(1e-6) * (est(1) * (1.0 - f)).max(1e-6)
                }
            };
            let score = if self.model.variables[j].is_binary() { score } else { score + 1e6 };
            if score > best_score + 1e-12 {
                best_score = score;
                best = j;
            }
        }
        best
    }

    fn record_pseudo(&mut self, var: usize, up: bool, frac: f64, gain: f64) {
        if let Some(k) = self.bins.iter().position(|&j| j == var) {
            let d = usize::from(up);
            self.pc_sum[k][d] += gain.max(0.0) / frac.max(1e-6);
            self.pc_cnt[k][d] += 1;
        }
    }

    /// Rounds the least fractional binary and re-solves until integral or
    /// stuck; finds an early incumbent for pruning.
    fn dive(&mut self, mut x: Vec<f64>) {
        let mut fix: Vec<(usize, f64, f64)> = Vec::new();
        for _ in 0..self.bins.len() {
            let mut pick = usize::MAX;
            let mut closest = f64::INFINITY;
            for &j in &self.bins {
                let f = x[j] - x[j].floor();
                let frac = f.min(1.0 - f);
                if frac > self.params.int_tol && frac < closest {
                    closest = frac;
                    pick = j;
                }
            }
            if pick == usize::MAX {
                return;
            }
            let v = x[pick].round();
            let other = if v == x[pick].floor() { v + 1.0 } else { v - 1.0 };
            let mut next = None;
            for val in [v, other] {
                fix.push((pick, val, val));
                self.apply(&fix);
                match self.evaluate(self.params.max_cone_cuts_per_node) {
                    Outcome::Fractional(_, nx) => {
                        next = Some(nx);
                        break;
                    }
                    Outcome::Integral | Outcome::Pruned | Outcome::Failed | Outcome::Interrupted => return,
                    Outcome::Infeasible => {
                        fix.pop();
                    }
                }
            }
            match next {
                Some(nx) => x = nx,
                None => return,
            }
        }
    }
}

/// Best-bound branch-and-cut over the model's integer variables.
///
/// Cone rows are handled by outer approximation: violated cones are cut at
/// fractional nodes (up to `max_cone_cuts_per_node`) and always at integral
/// candidates. Lazy generators run at integral candidates; a candidate is
/// accepted only after its binaries are fixed and the continuous part is
/// re-solved and re-checked.
pub fn solve_mip(model: &Model, params: &SolverParams, lazy: &[&dyn LazyCuts]) -> SolveResult {
    let start = Instant::now();
    if let Err(e) = model.validate() {
        warn!("{e}");
        return SolveResult::infeasible(0.0, 0);
    }
    let bins: Vec<usize> = (0..model.num_vars()).filter(|&j| model.variables[j].is_integer()).collect();
    let mut slot = vec![usize::MAX; model.num_vars()];
    for (k, &j) in bins.iter().enumerate() {
        slot[j] = k;
    }
    let mut lp = LpSolver::from_model(model);
    lp.tol.primal = params.feas_tol;
    lp.deadline = params.time_limit.and_then(|t| start.checked_add(std::time::Duration::from_secs_f64(t)));
    let base = bins.iter().map(|&j| lp.bounds(j)).collect();
    let mut eng = Engine {
        model,
        params,
        lazy,
        lp,
        pc_sum: vec![[0.0; 2]; bins.len()],
        pc_cnt: vec![[0; 2]; bins.len()],
        bins,
        slot,
        base,
        obj_const: model.objective.constant,
        ub: f64::INFINITY,
        incumbent: None,
        cuts: 0,
        trouble: false,
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, depth: 0, bound: f64::NEG_INFINITY, fix: Vec::new(), basis: None, branch: None });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut lb = f64::NEG_INFINITY;
    let mut failed_floor = f64::INFINITY;
    let mut limit_hit = false;

    while let Some(node) = heap.pop() {
        if eng.prunable(node.bound) {
            continue;
        }
        let timed_out = params.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t);
        let node_cap = params.node_limit.is_some_and(|n| nodes >= n);
        if timed_out || node_cap {
            limit_hit = true;
            heap.push(node);
            break;
        }
        nodes += 1;
        eng.apply(&node.fix);
        if let Some(b) = &node.basis {
            eng.lp.set_basis(b);
        }
        let budget = params.max_cone_cuts_per_node;
        let outcome = eng.evaluate(budget);
        trace!(
            "node {} depth {} parent bound {:.9} -> {}",
            node.id,
            node.depth,
            node.bound,
            match &outcome {
                Outcome::Interrupted => "interrupted".to_string(),
                Outcome::Infeasible => "infeasible".to_string(),
                Outcome::Pruned => "pruned".to_string(),
                Outcome::Failed => "lp failure".to_string(),
                Outcome::Integral => format!("integral, ub {:.9}", eng.ub),
                Outcome::Fractional(o, _) => format!("fractional {o:.9}"),
            }
        );
        match outcome {
            Outcome::Interrupted => {
                limit_hit = true;
                heap.push(node);
                break;
            }
            Outcome::Infeasible | Outcome::Pruned | Outcome::Integral => {}
            Outcome::Failed => {
                eng.trouble = true;
                failed_floor = failed_floor.min(node.bound);
            }
            Outcome::Fractional(obj, x) => {
                if let Some((var, up, frac)) = node.branch {
                    if node.bound.is_finite() {
                        eng.record_pseudo(var, up, frac, obj - node.bound);
                    }
                }
                let mut j = eng.choose_branch(&x, params.int_tol);
                if j == usize::MAX {
                    j = eng.choose_branch(&x, 0.0);
                }
                if j == usize::MAX {
                    eng.trouble = true;
                    failed_floor = failed_floor.min(obj);
                    continue;
                }
                let basis = Arc::new(eng.lp.basis());
                let up_first = x[j] >= 0.5;
                let f = x[j] - x[j].floor();
                for up in if up_first { [true, false] } else { [false, true] } {
                    let mut fix = node.fix.clone();
                    let fl = x[j].floor();
                    fix.push(if up { (j, fl + 1.0, f64::INFINITY) } else { (j, f64::NEG_INFINITY, fl) });
                    heap.push(Node {
                        id: next_id,
                        depth: node.depth + 1,
                        bound: obj,
                        fix,
                        basis: Some(basis.clone()),
                        branch: Some((j, up, if up { 1.0 - f } else { f })),
                    });
                    next_id += 1;
                }
                if node.id == 0 && eng.incumbent.is_none() {
                    eng.dive(x);
                }
            }
        }
        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound).min(failed_floor);
        let candidate = if eng.incumbent.is_some() { open.min(eng.ub) } else { open };
        if candidate > lb {
            lb = candidate;
        }
        if eng.incumbent.is_some() && eng.ub - lb <= eng.cutoff_tol() {
            break;
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let lp_iterations = eng.lp.iterations;
    let Some(values) = eng.incumbent.take() else {
        let status = if limit_hit || eng.trouble { SolveStatus::TimeLimit } else { SolveStatus::Infeasible };
        if status == SolveStatus::TimeLimit {
            return SolveResult {
                status,
                values: Vec::new(),
                objective: None,
                bound: lb.is_finite().then_some(lb),
                gap: None,
                wall_time,
                nodes,
                lp_iterations,
                cuts: eng.cuts,
                alpha: None,
            };
        }
        return SolveResult { lp_iterations, cuts: eng.cuts, ..SolveResult::infeasible(wall_time, nodes) };
    };
    let ub = eng.ub;
    // an emptied queue proves optimality up to pruning tolerance
    let open_floor = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min).min(failed_floor);
    let lb = lb.max(open_floor.min(ub)).min(ub);
    let gap = relative_gap(ub, lb);
    let status = if limit_hit && ub - lb > eng.cutoff_tol() {
        SolveStatus::TimeLimit
    } else if eng.trouble && ub - lb > eng.cutoff_tol() {
        SolveStatus::FeasibleGap
    } else {
        SolveStatus::Optimal
    };
    let alpha = model.find_var("alpha").map(|v| values[v.0]);
    SolveResult {
        status,
        values,
        objective: Some(ub),
        bound: Some(lb),
        gap: Some(gap),
        wall_time,
        nodes,
        lp_iterations,
        cuts: eng.cuts,
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ir::{LinExpr, Sense};

    #[test]
    fn tiny_knapsack() {
        let mut m = Model::new("k");
        let a = m.add_binary("u1");
        let b = m.add_binary("u2");
        m.add_constraint("cap", LinExpr::var(a).with(b, 1.0), Sense::Le, 1.5);
        m.set_objective(LinExpr::term(a, -1.0).with(b, -1.0));
        let r = solve_mip(&m, &SolverParams::default(), &[]);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() + 1.0).abs() < 1e-12);
        assert!((r.values[0] + r.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_mip() {
        let mut m = Model::new("k");
        let a = m.add_binary("u1");
        let b = m.add_binary("u2");
        m.add_constraint("c", LinExpr::var(a).with(b, 1.0), Sense::Eq, 1.5);
        let r = solve_mip(&m, &SolverParams::default(), &[]);
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn cone_handled_by_cuts() {
        // min q + w s.t. q w >= 1 (as q + w >= ||(q - w, 2)||)
        let mut m = Model::new("c");
        let q = m.add_continuous("q", 0.0, 10.0);
        let w = m.add_continuous("w", 0.0, 10.0);
        m.add_cone("k", vec![LinExpr::var(q).with(w, -1.0), LinExpr::constant(2.0)], LinExpr::var(q).with(w, 1.0));
        m.set_objective(LinExpr::var(q).with(w, 1.0));
        let r = solve_mip(&m, &SolverParams::default(), &[]);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 2.0).abs() < 1e-6, "{:?}", r.objective);
    }
}
