//! Closed-form and enumeration oracles, independent of the MILP builders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{floor_alpha_n, mean_total, omega_coefficient, ModelKind, PeriodInstance, ADJ_W_ALPHA_MAX};
use crate::model_ir::{LinExpr, Model, Sense};
use crate::scenario::{capacity_exceeds_min_total, AmbiguityKind, ScenarioSet, SortedScenarios};
use crate::solver::{SolveResult, SolveStatus};
use crate::thermal::step_temperature;

/// Enumeration limit of [`brute_force_optimum`].
pub const MAX_BRUTE_FORCE_UNITS: usize = 20;
const SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub feasible: bool,
    pub slack: f64,
    pub detail: String,
}

impl OracleVerdict {
    fn from_slack(slack: f64, detail: String) -> Self {
        OracleVerdict { feasible: slack >= -SLACK_TOL, slack, detail }
    }
}

/// Left-hand side of the sorted-sample condition at `load`, allowing any
/// `alpha` in `(0, 1]`.
pub fn wasserstein_lhs(load: f64, sorted: &SortedScenarios, alpha: f64) -> f64 {
    let n = sorted.n();
    let nf = n as f64;
    let k = floor_alpha_n(alpha, n).min(n);
    let a = |i: usize| (load - sorted.p(i)).max(0.0);
    let head: f64 = (1..=k).map(a).sum::<f64>() / nf;
    if k < n {
        head + (alpha - k as f64 / nf).max(0.0) * a(k + 1)
    } else {
        head
    }
}

pub fn wasserstein_feasible(load: f64, sorted: &SortedScenarios, alpha: f64, delta: f64) -> OracleVerdict {
    if !capacity_exceeds_min_total(sorted) {
        return OracleVerdict {
            feasible: false,
            slack: f64::NEG_INFINITY,
            detail: "fleet capacity does not exceed the smallest PV total".into(),
        };
    }
    let lhs = wasserstein_lhs(load, sorted, alpha);
    OracleVerdict::from_slack(lhs - delta, format!("load {load} kW: LHS {lhs:.12} vs radius {delta}"))
}

pub fn moment_feasible(load: f64, theta: f64, sigma: f64, omega: f64) -> OracleVerdict {
    let threshold = theta + omega * sigma;
    OracleVerdict::from_slack(load - threshold, format!("load {load} kW vs threshold {threshold} kW"))
}

/// Empirical chance constraint: the probability of `load < total` is at most
/// `alpha`.
pub fn saa_feasible(load: f64, scenarios: &ScenarioSet, alpha: f64) -> OracleVerdict {
    let violated: Vec<f64> =
        scenarios.totals.iter().zip(&scenarios.probabilities).filter(|(&t, _)| load < t).map(|(_, &p)| p).collect();
    let p0 = scenarios.probabilities[0];
    let slack = if scenarios.probabilities.iter().all(|&p| (p - p0).abs() <= 1e-15) {
        floor_alpha_n(alpha, scenarios.len()) as f64 - violated.len() as f64
    } else {
        alpha - violated.iter().sum::<f64>()
    };
    OracleVerdict::from_slack(slack, format!("load {load} kW violates {} samples", violated.len()))
}

/// Fraction of samples whose total the load covers.
pub fn out_of_sample_probability(load: f64, samples: &ScenarioSet) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.totals.iter().filter(|&&t| load >= t).count() as f64 / samples.len() as f64
}

/// Smallest `alpha` in `[1/N, alpha_max]` meeting the sorted-sample condition.
///
/// The left-hand side is continuous, piecewise linear and non-decreasing in
/// `alpha` with knots at `k/N`, so the answer is found on the first segment
/// whose right end reaches `delta`.
pub fn adj_wasserstein_min_alpha(load: f64, sorted: &SortedScenarios, delta: f64, alpha_max: f64) -> Option<f64> {
    let n = sorted.n();
    let nf = n as f64;
    let lo = 1.0 / nf;
    let at = |a: f64| wasserstein_lhs(load, sorted, a);
    if at(lo) >= delta {
        return Some(lo);
    }
    if at(alpha_max) < delta {
        return None;
    }
    for k in 1..n {
        let right = ((k + 1) as f64 / nf).min(alpha_max);
        if at(right) >= delta {
            let left = k as f64 / nf;
            let base = at(left);
            let slope = (load - sorted.p(k + 1)).max(0.0);
            let a = if slope > 0.0 { left + (delta - base) / slope } else { right };
            return Some(a.clamp(left.max(lo), right));
        }
    }
    None
}

/// Smallest `alpha` in `[alpha_lo, alpha_max]` with `load >= theta + Omega(alpha) sigma`.
pub fn adj_moment_min_alpha(
    load: f64,
    theta: f64,
    sigma: f64,
    gamma1: f64,
    gamma2: f64,
    alpha_lo: f64,
    alpha_max: f64,
) -> Option<f64> {
    let feasible = |a: f64| load - theta - omega_coefficient(gamma1, gamma2, a) * sigma >= -SLACK_TOL;
    if !feasible(alpha_max) {
        return None;
    }
    if feasible(alpha_lo) {
        return Some(alpha_lo);
    }
    let switch = gamma1 / gamma2;
    let slack = load - theta;
    // branch alpha <= gamma1/gamma2: sqrt(gamma2/alpha) sigma <= load - theta
    let low_branch = (slack > 0.0).then(|| gamma2 * sigma * sigma / (slack * slack)).filter(|&a| a <= switch);
    let a = match low_branch {
        Some(a) => a,
        None => {
            // branch alpha >= gamma1/gamma2
            let r = (slack - sigma * gamma1.sqrt()) / sigma;
            let spread = gamma2 - gamma1;
            if r <= 0.0 {
                return None;
            }
            (spread / (r * r + spread)).max(switch)
        }
    };
    Some(a.clamp(alpha_lo, alpha_max))
}

/// Temperatures and comfort-plus-switching cost of a schedule, or `None`
/// when a temperature leaves the comfort band.
pub fn thermal_cost(inst: &PeriodInstance, u: &[u8]) -> Option<(Vec<f64>, f64)> {
    let f = &inst.fleet;
    let mut cost = 0.0;
    let mut temps = Vec::with_capacity(u.len());
    for ((b, &x0), &ui) in f.buildings.iter().zip(&inst.x_prev).zip(u) {
        let x = step_temperature(b, x0, ui);
        if x < f.x_min - 1e-9 || x > f.x_max + 1e-9 {
            return None;
        }
        cost += f.c_sys * (x - f.x_ref).abs() + f.c_switch * f64::from(ui);
        temps.push(x);
    }
    Some((temps, cost))
}

/// Settings the oracle needs to mirror a builder.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub pv_known: Option<f64>,
    pub alpha_lo_moment: f64,
    /// Upper end of the adjustable moment interval (1 for the exact
    /// orchestration, 0.75 for branch-and-cut).
    pub alpha_max_moment: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { pv_known: None, alpha_lo_moment: 1e-4, alpha_max_moment: 1.0 }
    }
}

/// DR part of the objective for a schedule with fleet load `load`: `Some(0)`
/// for feasible fixed-risk models, `Some(c alpha*)` for adjustable ones,
/// `None` when infeasible. Also returns `alpha*`.
pub fn dr_term(inst: &PeriodInstance, kind: ModelKind, load: f64, opts: &OracleOptions) -> Result<Option<(f64, Option<f64>)>> {
    let m = &inst.moments;
    let yes = |ok: bool| if ok { Some((0.0, None)) } else { None };
    Ok(match (kind, inst.ambiguity.kind) {
        (ModelKind::Deterministic, _) => {
            let pv = opts.pv_known.unwrap_or_else(|| mean_total(&inst.scenarios));
            Some((inst.fleet.c_pv * (load - pv).abs(), None))
        }
        (ModelKind::ChanceSaa, _) => yes(saa_feasible(load, &inst.scenarios, alpha_of(inst)?).feasible),
        (ModelKind::DrccMoment, AmbiguityKind::Moment { gamma1, gamma2 }) => {
            let omega = omega_coefficient(gamma1, gamma2, alpha_of(inst)?);
            yes(moment_feasible(load, m.theta, m.sigma, omega).feasible)
        }
        (ModelKind::DrccW1 | ModelKind::DrccW2, AmbiguityKind::Wasserstein { delta }) => {
            yes(wasserstein_feasible(load, &inst.sorted, alpha_of(inst)?, delta).feasible)
        }
        (ModelKind::AdjMoment, AmbiguityKind::Moment { gamma1, gamma2 }) => {
            let cost = cost_of(inst)?;
            adj_moment_min_alpha(load, m.theta, m.sigma, gamma1, gamma2, opts.alpha_lo_moment, opts.alpha_max_moment)
                .map(|a| (cost * a, Some(a)))
        }
        (ModelKind::AdjWBigM | ModelKind::AdjWFree, AmbiguityKind::Wasserstein { delta }) => {
            let cost = cost_of(inst)?;
            if !capacity_exceeds_min_total(&inst.sorted) {
                return Err(Error::DrInfeasible("fleet capacity does not exceed the smallest PV total".into()));
            }
            adj_wasserstein_min_alpha(load, &inst.sorted, delta, ADJ_W_ALPHA_MAX).map(|a| (cost * a, Some(a)))
        }
        (ModelKind::FleetSize, _) => {
            return Err(Error::InvalidInput("the fleet-size model has no single-period oracle".into()))
        }
        (k, _) => return Err(Error::InvalidInput(format!("{k} does not match the instance's ambiguity set"))),
    })
}

fn alpha_of(inst: &PeriodInstance) -> Result<f64> {
    inst.ambiguity.alpha().ok_or_else(|| Error::InvalidInput("fixed risk level required".into()))
}

fn cost_of(inst: &PeriodInstance) -> Result<f64> {
    inst.ambiguity.risk_cost().ok_or_else(|| Error::InvalidInput("adjustable risk level required".into()))
}

fn schedule_of(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|l| ((mask >> l) & 1) as u8).collect()
}

/// Exact optimum over all `2^N_HVAC` schedules. `values` of the result holds
/// the schedule only.
pub fn brute_force_optimum(inst: &PeriodInstance, kind: ModelKind, opts: &OracleOptions) -> Result<SolveResult> {
    let n = inst.n_hvac();
    if n > MAX_BRUTE_FORCE_UNITS {
        return Err(Error::InvalidInput(format!(
            "brute force enumerates at most {MAX_BRUTE_FORCE_UNITS} units (got {n})"
        )));
    }
    if kind == ModelKind::FleetSize {
        return Err(Error::InvalidInput("the fleet-size model has no single-period oracle".into()));
    }
    if kind.uses_wasserstein() && !capacity_exceeds_min_total(&inst.sorted) {
        return Err(Error::DrInfeasible("fleet capacity does not exceed the smallest PV total".into()));
    }
    // surface mismatched kinds before enumerating
    dr_term(inst, kind, 0.0, opts)?;
    let start = std::time::Instant::now();
    let powers = inst.fleet.powers();
    let best = (0..1u64 << n)
        .into_par_iter()
        .filter_map(|mask| {
            let u = schedule_of(mask, n);
            let (_, cost) = thermal_cost(inst, &u)?;
            let load: f64 = powers.iter().zip(&u).map(|(p, &ui)| p * f64::from(ui)).sum();
            let (extra, alpha) = dr_term(inst, kind, load, opts).ok()??;
            Some((cost + extra, mask, alpha))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let wall_time = start.elapsed().as_secs_f64();
    Ok(match best {
        None => SolveResult::infeasible(wall_time, 1 << n),
        Some((obj, mask, alpha)) => SolveResult {
            status: SolveStatus::Optimal,
            values: schedule_of(mask, n).into_iter().map(f64::from).collect(),
            objective: Some(obj),
            bound: Some(obj),
            gap: Some(0.0),
            wall_time,
            nodes: 1 << n,
            lp_iterations: 0,
            cuts: 0,
            alpha,
        },
    })
}

/// Re-checks a solver result: schedule feasibility through the oracles, the
/// reported `alpha*`, and the objective.
pub fn verify_result(inst: &PeriodInstance, kind: ModelKind, result: &SolveResult, opts: &OracleOptions) -> Result<OracleVerdict> {
    let Some(obj) = result.objective else {
        return Ok(OracleVerdict { feasible: false, slack: f64::NEG_INFINITY, detail: "no incumbent".into() });
    };
    let n = inst.n_hvac();
    if result.values.len() < n {
        return Err(Error::Verification(format!("result has {} values for {n} units", result.values.len())));
    }
    let u = crate::formulations::schedule_from(&result.values, n);
    let Some((_, thermal)) = thermal_cost(inst, &u) else {
        return Ok(OracleVerdict {
            feasible: false,
            slack: f64::NEG_INFINITY,
            detail: "schedule leaves the comfort band".into(),
        });
    };
    let load = inst.fleet.load(&u);
    let Some((best_extra, best_alpha)) = dr_term(inst, kind, load, opts)? else {
        return Ok(OracleVerdict {
            feasible: false,
            slack: f64::NEG_INFINITY,
            detail: format!("schedule with load {load} kW fails the DR condition"),
        });
    };
    // adjustable results may report any feasible alpha at or above the minimum
    let (extra, alpha_note) = match (best_alpha, result.alpha) {
        (Some(a_min), Some(a)) => {
            if a < a_min - 1e-6 {
                return Ok(OracleVerdict {
                    feasible: false,
                    slack: a - a_min,
                    detail: format!("reported alpha {a} is below the smallest feasible {a_min}"),
                });
            }
            (cost_of(inst)? * a, format!(", alpha {a} (min {a_min})"))
        }
        _ => (best_extra, String::new()),
    };
    let recomputed = thermal + extra;
    let tol = 1e-6 * (1.0 + obj.abs());
    let slack = tol - (recomputed - obj).abs();
    Ok(OracleVerdict {
        feasible: slack >= 0.0,
        slack,
        detail: format!("objective {obj} vs recomputed {recomputed}{alpha_note}"),
    })
}

/// The CVaR primal LP at fixed `a`: `min -(1/N) sum z - alpha gamma` with
/// `z_n + gamma <= a_n`, `z <= 0`, `gamma >= 0`. Its optimum is minus the
/// sorted-sample left-hand side.
pub fn cvar_primal_lp(a: &[f64], alpha: f64) -> Model {
    let n = a.len() as f64;
    let mut m = Model::new("cvar-primal");
    let gamma = m.add_continuous("gamma", 0.0, f64::INFINITY);
    let mut obj = LinExpr::term(gamma, -alpha);
    for (i, &ai) in a.iter().enumerate() {
        let z = m.add_continuous(format!("z[{i}]"), f64::NEG_INFINITY, 0.0);
        obj.add_term(z, -1.0 / n);
        m.add_constraint(format!("cap[{i}]"), LinExpr::var(z).with(gamma, 1.0), Sense::Le, ai);
    }
    m.set_objective(obj);
    m
}

/// Greedy dual value `sum pi_n a_(n)` with `a` sorted ascending.
pub fn greedy_dual_value(a: &[f64], alpha: f64) -> f64 {
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    crate::formulations::dual_pi(a.len(), alpha).iter().zip(&sorted).map(|(p, v)| p * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sort_totals;
    use crate::solver::solve_lp;

    fn sorted(totals: &[f64], p0: f64) -> SortedScenarios {
        sort_totals(&ScenarioSet::from_totals(0, totals).unwrap(), p0)
    }

    #[test]
    fn lhs_hand_example() {
        let s = sorted(&[10.0, 8.0, 6.0, 4.0], 20.0);
        assert!((wasserstein_lhs(9.0, &s, 0.3) - 0.05).abs() < 1e-12);
        assert!(wasserstein_feasible(9.0, &s, 0.3, 0.05).feasible);
        assert!(!wasserstein_feasible(9.0, &s, 0.3, 0.0501).feasible);
        assert_eq!(wasserstein_lhs(4.0, &s, 0.3), 0.0);
        assert_eq!(wasserstein_lhs(3.0, &s, 0.9), 0.0);
    }

    #[test]
    fn lhs_matches_cvar_lp() {
        let s = sorted(&[10.0, 8.0, 6.0, 4.0, 7.5], 20.0);
        for &load in &[3.0, 5.0, 7.0, 9.0, 12.0] {
            for &alpha in &[0.1, 0.2, 0.45, 0.8] {
                let a: Vec<f64> = s.sorted_totals.iter().map(|p| (load - p).max(0.0)).collect();
                let lp = solve_lp(&cvar_primal_lp(&a, alpha));
                let lhs = wasserstein_lhs(load, &s, alpha);
                assert!((lp.objective + lhs).abs() < 1e-9, "load {load} alpha {alpha}");
                assert!((greedy_dual_value(&a, alpha) - lhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moment_verdicts() {
        let v = moment_feasible(340.0, 300.0, 20.0, 2.0);
        assert!(v.feasible);
        assert_eq!(v.slack, 0.0);
        assert!(moment_feasible(300.0, 300.0, 0.0, 7.0).feasible);
        assert!(!moment_feasible(299.0, 300.0, 0.0, 7.0).feasible);
    }

    #[test]
    fn out_of_sample_counts() {
        let s = ScenarioSet::from_totals(0, &[10.0, 8.0, 6.0, 4.0]).unwrap();
        assert_eq!(out_of_sample_probability(9.0, &s), 0.75);
        assert_eq!(out_of_sample_probability(10.0, &s), 1.0);
        assert_eq!(out_of_sample_probability(1.0, &s), 0.0);
    }

    #[test]
    fn min_alpha_wasserstein_is_tight() {
        let s = sorted(&[10.0, 8.0, 6.0, 4.0, 7.5, 3.0], 20.0);
        for &load in &[5.0, 7.0, 9.0, 11.0] {
            if let Some(a) = adj_wasserstein_min_alpha(load, &s, 0.3, ADJ_W_ALPHA_MAX) {
                assert!(wasserstein_lhs(load, &s, a) >= 0.3 - 1e-9);
                if a > 1.0 / 6.0 + 1e-9 {
                    assert!(wasserstein_lhs(load, &s, a - 1e-6) < 0.3);
                }
            } else {
                assert!(wasserstein_lhs(load, &s, ADJ_W_ALPHA_MAX) < 0.3);
            }
        }
    }

    #[test]
    fn min_alpha_moment_is_tight() {
        for &(g1, g2) in &[(0.0, 1.0), (0.5, 1.0), (0.2, 2.0)] {
            for &load in &[105.0, 120.0, 160.0] {
                let a = adj_moment_min_alpha(load, 100.0, 10.0, g1, g2, 1e-4, 1.0);
                if let Some(a) = a {
                    let slack = load - 100.0 - omega_coefficient(g1, g2, a) * 10.0;
                    assert!(slack >= -1e-9);
                    if a > 1e-4 + 1e-9 {
                        assert!(slack.abs() < 1e-7, "g=({g1},{g2}) load {load} a {a} slack {slack}");
                    }
                }
            }
        }
    }
}
