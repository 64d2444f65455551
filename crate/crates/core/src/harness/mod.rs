//! Receding-horizon driver, out-of-sample evaluation, adjustable-moment
//! orchestration, risk-cost sweeps and benchmark tables.

mod output;

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AdjWMethod, MomentMode, RunConfig, SeedStream};
use crate::error::{Error, Result};
use crate::formulations::{
    build, build_adj_socp1, build_load_floor, build_adj_socp2, build_adj_socp3, schedule_from, BuildOptions, Built, ModelKind,
    PeriodInstance,
};
use crate::scenario::{
    empirical_moments, generate_uniform_scenarios, read_scenarios_csv, AmbiguitySpec, PvProfile, ScenarioSet,
};
use crate::solver::{relative_gap, solve_mip, SolveResult, SolveStatus, SolverParams};
use crate::thermal::FleetModel;
use crate::formulations::ADJ_W_ALPHA_MAX;
use crate::scenario::capacity_exceeds_min_total;
use crate::verify::{adj_wasserstein_min_alpha, out_of_sample_probability, thermal_cost};

pub use output::{
    write_bench_csv, write_day_outputs, write_loads_csv, write_oos_csv, write_period_results, write_schedule_csv,
    write_sweep_csv, write_temps_csv, PeriodResultFile,
};

/// Inputs shared by every run of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DayData {
    pub fleet: FleetModel,
    pub profile: PvProfile,
    pub in_sample: Vec<ScenarioSet>,
    /// Subset behind the moment estimate of each period.
    pub moment_sets: Vec<ScenarioSet>,
    pub x0: Vec<f64>,
}

pub fn prepare_day(cfg: &RunConfig) -> Result<DayData> {
    let fleet = cfg.fleet.fleet()?;
    let profile = cfg.profile()?;
    let sc = &cfg.scenarios;
    let in_sample = match &sc.samples_path {
        Some(path) => {
            let f = std::fs::File::open(path)
                .map_err(|e| Error::config("scenarios.samples_path", format!("{}: {e}", path.display())))?;
            read_scenarios_csv(f).map_err(|e| Error::config("scenarios.samples_path", e.to_string()))?
        }
        None => generate_uniform_scenarios(&profile, sc.frac, sc.n_samples, cfg.seed(SeedStream::InSample))?,
    };
    if in_sample.len() != profile.n_periods() {
        return Err(Error::config(
            "scenarios.samples_path",
            format!("{} scenario periods for a {}-period profile", in_sample.len(), profile.n_periods()),
        ));
    }
    let subset_seed = cfg.seed(SeedStream::MomentSubset);
    let moment_sets = in_sample
        .iter()
        .map(|s| s.random_subset(sc.moment_samples.min(s.len()), subset_seed))
        .collect::<Result<Vec<_>>>()?;
    let x0 = initial_temperatures(cfg, fleet.len());
    Ok(DayData { fleet, profile, in_sample, moment_sets, x0 })
}

pub fn initial_temperatures(cfg: &RunConfig, n: usize) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let [lo, hi] = cfg.fleet.x0_range;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed(SeedStream::InitialTemps));
    (0..n).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect()
}

/// Out-of-sample sets, independent of the in-sample draws.
pub fn out_of_sample_sets(cfg: &RunConfig, profile: &PvProfile) -> Result<Vec<Vec<ScenarioSet>>> {
    let sc = &cfg.scenarios;
    (0..sc.oos_sets)
        .into_par_iter()
        .map(|s| generate_uniform_scenarios(profile, sc.frac, sc.oos_size, cfg.seed(SeedStream::OutOfSample(s))))
        .collect()
}

/// Single-period instance of period `t` for `kind`.
pub fn period_instance(
    cfg: &RunConfig,
    data: &DayData,
    kind: ModelKind,
    ambiguity: AmbiguitySpec,
    t: usize,
    x_prev: Vec<f64>,
) -> Result<PeriodInstance> {
    let scenarios = data.in_sample[t].clone();
    let source = if kind.uses_moments() { &data.moment_sets[t] } else { &scenarios };
    let moments = empirical_moments(source, cfg.scenarios.sigma_mode);
    PeriodInstance::new(data.fleet.clone(), x_prev, scenarios, moments, ambiguity, t)
}

/// Build options of period `t`: the deterministic model sees the profile mean.
pub fn period_options(cfg: &RunConfig, data: &DayData, t: usize) -> BuildOptions {
    BuildOptions { pv_known: Some(data.profile.total(t)), ..cfg.model.build.clone() }
}

/// Solves one period with the orchestration `kind` needs.
pub fn solve_period(
    cfg: &RunConfig,
    inst: &PeriodInstance,
    kind: ModelKind,
    opts: &BuildOptions,
    params: &SolverParams,
) -> Result<SolveResult> {
    match kind {
        ModelKind::AdjMoment => solve_adjustable_moment(inst, cfg.model.moment_mode, cfg.model.max_rule, opts, params),
        ModelKind::AdjWBigM | ModelKind::AdjWFree if cfg.model.adj_w_method == AdjWMethod::LoadScan => {
            match solve_adjustable_wasserstein_scan(inst, params)? {
                Some(r) => Ok(r),
                None => {
                    let mut milp = cfg.clone();
                    milp.model.adj_w_method = AdjWMethod::Milp;
                    solve_period(&milp, inst, kind, opts, params)
                }
            }
        }
        _ => match build(inst, kind, opts) {
            Ok(built) => Ok(built.solve(params)),
            Err(Error::DrInfeasible(msg)) => {
                warn!("period {}: {msg}", inst.period);
                Ok(SolveResult::infeasible(0.0, 0))
            }
            Err(e) => Err(e),
        },
    }
}

/// Adjustable Wasserstein optimum by scanning the number of units ON.
///
/// With equal unit powers the fleet load is `k P`, the smallest feasible
/// `alpha` is non-increasing in `k` and the cheapest schedule with at least
/// `k` units ON is a thermal-only MILP. Every optimum is reached at
/// `k = n_on`, so the best candidate, rescored at its actual load, is the
/// optimum. `None` when the powers differ.
pub fn solve_adjustable_wasserstein_scan(inst: &PeriodInstance, params: &SolverParams) -> Result<Option<SolveResult>> {
    let powers = inst.fleet.powers();
    let Some(&p) = powers.first() else { return Ok(None) };
    if powers.iter().any(|&q| q != p) {
        return Ok(None);
    }
    let cost = inst.ambiguity.risk_cost().ok_or_else(|| Error::InvalidInput("adjustable risk level required".into()))?;
    let Some(delta) = inst.delta() else {
        return Err(Error::InvalidInput("Wasserstein ambiguity required".into()));
    };
    let start = Instant::now();
    if !capacity_exceeds_min_total(&inst.sorted) {
        warn!("period {}: fleet capacity does not exceed the smallest PV total", inst.period);
        return Ok(Some(SolveResult::infeasible(0.0, 0)));
    }
    let levels: Vec<(usize, f64)> = (0..=powers.len())
        .filter_map(|k| adj_wasserstein_min_alpha(k as f64 * p, &inst.sorted, delta, ADJ_W_ALPHA_MAX).map(|a| (k, a)))
        .collect();
    let solved = levels
        .par_iter()
        .map(|&(k, a)| Ok((a, solve_mip(&build_load_floor(inst, k)?, params, &[]))))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, SolveResult)> = None;
    let mut bound = f64::INFINITY;
    let mut all_optimal = true;
    let mut nodes = 0;
    for (a_k, r) in solved {
        nodes += r.nodes;
        match r.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            _ => all_optimal = false,
        }
        bound = bound.min(r.bound.unwrap_or(f64::NEG_INFINITY) + cost * a_k);
        let Some(obj) = r.objective else { continue };
        let u = schedule_from(&r.values, inst.n_hvac());
        let Some(alpha) = adj_wasserstein_min_alpha(inst.fleet.load(&u), &inst.sorted, delta, ADJ_W_ALPHA_MAX) else {
            continue;
        };
        let thermal = thermal_cost(inst, &u).map_or(obj, |(_, c)| c);
        let total = thermal + cost * alpha;
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, SolveResult { objective: Some(total), alpha: Some(alpha), ..r }));
        }
    }
    let wall = start.elapsed().as_secs_f64();
    Ok(Some(match best {
        None if all_optimal => SolveResult::infeasible(wall, nodes),
        None => SolveResult { status: SolveStatus::TimeLimit, nodes, wall_time: wall, ..SolveResult::infeasible(wall, nodes) },
        Some((total, r)) => {
            let bound = bound.min(total);
            let gap = relative_gap(total, bound);
            let status = if all_optimal { SolveStatus::Optimal } else { r.status };
            SolveResult { status, bound: Some(bound), gap: Some(gap), nodes, wall_time: wall, ..r }
        }
    }))
}

/// Solves both `alpha` branches of the adjustable moment model and keeps
/// the smaller optimum (or the larger one with `max_rule`).
pub fn solve_adjustable_moment(
    inst: &PeriodInstance,
    mode: MomentMode,
    max_rule: bool,
    opts: &BuildOptions,
    params: &SolverParams,
) -> Result<SolveResult> {
    let start = Instant::now();
    let run = |b: Result<Built>| -> Result<Option<SolveResult>> {
        match b {
            Ok(built) => Ok(Some(built.solve(params))),
            Err(Error::EmptyBranch(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let low = run(build_adj_socp2(inst, opts.alpha_lo_moment).map(Built::plain))?;
    let high = match mode {
        MomentMode::Exact => run(build_adj_socp1(inst, opts.alpha_lo_moment).map(Built::plain))?,
        MomentMode::Bnc => run(build_adj_socp3(inst, opts.alpha_lo_moment, opts.alpha_hi_socp3)
            .map(|(model, gen)| Built { model, lazy: vec![Box::new(gen)] }))?,
    };
    let candidates: Vec<SolveResult> = [low, high].into_iter().flatten().filter(|r| r.has_incumbent()).collect();
    let mut best = candidates.iter().cloned().reduce(|a, b| {
        let (oa, ob) = (a.objective.unwrap_or(f64::INFINITY), b.objective.unwrap_or(f64::INFINITY));
        let take_b = if max_rule { ob > oa } else { ob < oa };
        if take_b {
            b
        } else {
            a
        }
    });
    let nodes = candidates.iter().map(|r| r.nodes).sum();
    let wall = start.elapsed().as_secs_f64();
    Ok(match best.take() {
        Some(mut r) => {
            r.nodes = nodes;
            r.wall_time = wall;
            r
        }
        None => SolveResult::infeasible(wall, nodes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub label: String,
    pub result: SolveResult,
    /// Schedule applied (the previous one when the period was infeasible).
    pub schedule: Vec<u8>,
    /// Temperatures entering the period.
    pub x_prev: Vec<f64>,
    /// Temperatures after applying `schedule`.
    pub temps: Vec<f64>,
    pub load_kw: f64,
    pub mean_pv_kw: f64,
    pub fallback: bool,
}

impl PeriodRecord {
    pub fn solved(&self) -> bool {
        !self.fallback && self.result.has_incumbent()
    }

    pub fn hit_limit(&self) -> bool {
        self.result.status == SolveStatus::TimeLimit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRun {
    pub kind: ModelKind,
    pub periods: Vec<PeriodRecord>,
    pub config: RunConfig,
    pub seed: u64,
}

impl DayRun {
    pub fn all_solved(&self) -> bool {
        self.periods.iter().all(PeriodRecord::solved)
    }

    pub fn loads(&self) -> Vec<f64> {
        self.periods.iter().map(|p| p.load_kw).collect()
    }

    /// Temperatures outside the comfort band (with a 1e-9 tolerance).
    pub fn comfort_violations(&self) -> usize {
        let f = &self.config.fleet;
        self.periods
            .iter()
            .flat_map(|p| &p.temps)
            .filter(|&&x| x < f.x_min - 1e-9 || x > f.x_max + 1e-9)
            .count()
    }

    pub fn total_cpu(&self) -> f64 {
        self.periods.iter().map(|p| p.result.wall_time).sum()
    }
}

/// Solves the day period by period, chaining realized temperatures.
pub fn run_sequential(cfg: &RunConfig, kind: ModelKind) -> Result<DayRun> {
    let data = prepare_day(cfg)?;
    run_sequential_with(cfg, &data, kind)
}

pub fn run_sequential_with(cfg: &RunConfig, data: &DayData, kind: ModelKind) -> Result<DayRun> {
    if kind == ModelKind::FleetSize {
        return Err(Error::InvalidInput("fleet-size is not a receding-horizon model".into()));
    }
    if cfg.solver.time_limit.is_none() {
        return Err(Error::config("solver.time_limit", "the sequential run needs a per-period time limit"));
    }
    let ambiguity = cfg.ambiguity_for(kind);
    let mut x_prev = data.x0.clone();
    let mut u_prev = vec![0u8; data.fleet.len()];
    let mut periods = Vec::with_capacity(data.profile.n_periods());
    for t in 0..data.profile.n_periods() {
        let inst = period_instance(cfg, data, kind, ambiguity, t, x_prev.clone())?;
        let opts = period_options(cfg, data, t);
        let result = solve_period(cfg, &inst, kind, &opts, &cfg.solver)?;
        let fallback = !result.has_incumbent();
        let schedule = if fallback {
            warn!("period {t} ({}): {kind} found no schedule, holding the previous one", data.profile.times[t]);
            u_prev.clone()
        } else {
            schedule_from(&result.values, data.fleet.len())
        };
        let temps = data.fleet.step(&x_prev, &schedule);
        let load_kw = data.fleet.load(&schedule);
        info!(
            "{kind} period {t} ({}): {:?} obj {:?} load {load_kw} kW in {:.3} s",
            data.profile.times[t], result.status, result.objective, result.wall_time
        );
        periods.push(PeriodRecord {
            period: t,
            label: data.profile.times[t].clone(),
            result,
            schedule: schedule.clone(),
            x_prev: x_prev.clone(),
            temps: temps.clone(),
            load_kw,
            mean_pv_kw: data.profile.total(t),
            fallback,
        });
        // the realized temperatures leave the band only under the fallback;
        // clamp so the next instance stays well posed
        x_prev = temps.iter().map(|x| x.clamp(data.fleet.x_min, data.fleet.x_max)).collect();
        u_prev = schedule;
    }
    Ok(DayRun { kind, periods, config: cfg.clone(), seed: cfg.scenarios.seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `probabilities[t][s]`: period `t`, evaluation set `s`.
    pub probabilities: Vec<Vec<f64>>,
    pub p95: Vec<f64>,
    pub comfort_violations: usize,
}

/// Nearest-rank percentile: the `ceil(q n)`-th smallest value.
pub fn nearest_rank(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

pub fn evaluate_out_of_sample(run: &DayRun, sets: &[Vec<ScenarioSet>]) -> EvalReport {
    let probabilities: Vec<Vec<f64>> = run
        .periods
        .par_iter()
        .map(|p| sets.iter().map(|set| out_of_sample_probability(p.load_kw, &set[p.period])).collect())
        .collect();
    let p95 = probabilities.iter().map(|ps| nearest_rank(ps, 0.95)).collect();
    EvalReport { probabilities, p95, comfort_violations: run.comfort_violations() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: ModelKind,
    pub period: usize,
    pub label: String,
    pub cost: f64,
    pub status: SolveStatus,
    pub alpha: Option<f64>,
    pub objective: Option<f64>,
}

/// Solves the selected periods of `kind` for every risk cost. Each period
/// starts from `x_prev[t]` (typically the temperatures of a reference run).
pub fn sweep_risk_cost(
    cfg: &RunConfig,
    data: &DayData,
    kind: ModelKind,
    costs: &[f64],
    periods: &[usize],
    x_prev: &[Vec<f64>],
) -> Result<Vec<SweepRow>> {
    if !kind.is_adjustable() {
        return Err(Error::InvalidInput(format!("{kind} has no risk cost to sweep")));
    }
    let jobs: Vec<(usize, f64)> = periods.iter().flat_map(|&t| costs.iter().map(move |&c| (t, c))).collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(t, cost)| {
            let inst = period_instance(cfg, data, kind, cfg.ambiguity_with_cost(kind, cost), t, x_prev[t].clone())?;
            let r = solve_period(cfg, &inst, kind, &period_options(cfg, data, t), &cfg.solver)?;
            Ok(SweepRow {
                kind,
                period: t,
                label: data.profile.times[t].clone(),
                cost,
                status: r.status,
                alpha: r.alpha,
                objective: r.objective,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.period.cmp(&b.period).then(a.cost.total_cmp(&b.cost)));
    Ok(rows)
}

/// Monotonicity breaches of a sweep: objective decreasing or `alpha*`
/// increasing between consecutive costs of one period, beyond `tol`
/// (relative for the objective, absolute for `alpha`).
pub fn sweep_violations(rows: &[SweepRow], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.period != b.period || a.kind != b.kind {
            continue;
        }
        match (a.objective, b.objective, a.alpha, b.alpha) {
            (Some(oa), Some(ob), Some(aa), Some(ab)) => {
                if ob < oa - tol * (1.0 + oa.abs()) {
                    out.push(format!("{} period {}: objective {oa} -> {ob} at cost {}", a.kind, a.period, b.cost));
                }
                if ab > aa + tol {
                    out.push(format!("{} period {}: alpha {aa} -> {ab} at cost {}", a.kind, a.period, b.cost));
                }
            }
            _ => out.push(format!("{} period {}: missing solution near cost {}", a.kind, a.period, b.cost)),
        }
    }
    out
}

/// Tolerance of [`sweep_violations`] for runs at the default gaps.
pub const SWEEP_TOL: f64 = 1e-5;

/// Configuration, data and starting temperatures of a sweep of `kind`.
///
/// The adjustable Wasserstein sweep uses `sweep.wasserstein_samples`
/// in-sample draws. Every period starts from the temperatures of a
/// fixed-risk reference run of the same ambiguity family.
pub fn sweep_setup(cfg: &RunConfig, kind: ModelKind) -> Result<(RunConfig, DayData, Vec<Vec<f64>>)> {
    let mut c = cfg.clone();
    let reference = if kind.uses_moments() {
        ModelKind::DrccMoment
    } else {
        c.scenarios.n_samples = cfg.sweep.wasserstein_samples;
        c.scenarios.moment_samples = c.scenarios.moment_samples.min(c.scenarios.n_samples);
        c.model.adj_w_method = cfg.sweep.adj_w_method;
        ModelKind::DrccW2
    };
    let data = prepare_day(&c)?;
    let run = run_sequential_with(&c, &data, reference)?;
    let x_prev = run.periods.iter().map(|p| p.x_prev.clone()).collect();
    Ok((c, data, x_prev))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub kind: ModelKind,
    pub total_cpu: f64,
    pub limit_hits: usize,
    /// Mean gap of the limit-hit periods; `None` when there were none.
    pub mean_gap: Option<f64>,
    pub infeasible: usize,
}

pub fn bench_report(runs: &[(String, DayRun)]) -> Vec<BenchRow> {
    runs.iter()
        .map(|(name, run)| {
            let hits: Vec<&PeriodRecord> = run.periods.iter().filter(|p| p.hit_limit()).collect();
            let gaps: Vec<f64> = hits.iter().filter_map(|p| p.result.gap).collect();
            BenchRow {
                instance: name.clone(),
                kind: run.kind,
                total_cpu: run.total_cpu(),
                limit_hits: hits.len(),
                mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                infeasible: run.periods.iter().filter(|p| p.fallback).count(),
            }
        })
        .collect()
}

/// Runs `kinds` on `instances` in-sample draws (distinct master seeds),
/// in parallel across instances.
pub fn run_bench(cfg: &RunConfig, kinds: &[ModelKind], instances: usize) -> Result<Vec<(String, DayRun)>> {
    let jobs: Vec<(usize, ModelKind)> = (0..instances).flat_map(|i| kinds.iter().map(move |&k| (i, k))).collect();
    jobs.par_iter()
        .map(|&(i, kind)| {
            let mut c = cfg.clone();
            c.scenarios.seed = cfg.seed(SeedStream::Bench(i));
            Ok((format!("instance-{i}"), run_sequential(&c, kind)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut c = RunConfig::default();
        c.fleet.n_buildings = 8;
        c.profile.n_periods = 6;
        c.profile.peak_kw = 12.0;
        c.scenarios.n_samples = 20;
        c.scenarios.oos_size = 200;
        c.solver.time_limit = Some(10.0);
        c
    }

    #[test]
    fn nearest_rank_takes_the_max_of_ten() {
        let v: Vec<f64> = (0..10).map(|i| 0.80 + 0.02 * i as f64).collect();
        assert_eq!(nearest_rank(&v, 0.95), v[9]);
        assert_eq!(nearest_rank(&[0.3, 0.1, 0.2], 0.5), 0.2);
    }

    #[test]
    fn full_load_is_never_short() {
        let c = small_config();
        let data = prepare_day(&c).unwrap();
        let mut run = run_sequential_with(&c, &data, ModelKind::Deterministic).unwrap();
        for p in &mut run.periods {
            p.load_kw = 1e6;
        }
        let sets = out_of_sample_sets(&c, &data.profile).unwrap();
        let rep = evaluate_out_of_sample(&run, &sets);
        assert!(rep.probabilities.iter().flatten().all(|&p| p == 1.0));
    }

    #[test]
    fn temperatures_chain() {
        let c = small_config();
        let run = run_sequential(&c, ModelKind::DrccW2).unwrap();
        assert!(run.all_solved());
        assert_eq!(run.comfort_violations(), 0);
        let fleet = c.fleet.fleet().unwrap();
        for w in run.periods.windows(2) {
            assert_eq!(w[1].x_prev, w[0].temps);
            assert_eq!(fleet.step(&w[1].x_prev, &w[1].schedule), w[1].temps);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = small_config();
        let a = run_sequential(&c, ModelKind::ChanceSaa).unwrap();
        let b = run_sequential(&c, ModelKind::ChanceSaa).unwrap();
        assert_eq!(a.loads(), b.loads());
        assert_eq!(
            a.periods.iter().map(|p| p.schedule.clone()).collect::<Vec<_>>(),
            b.periods.iter().map(|p| p.schedule.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn adjustable_moment_modes_agree() {
        let mut c = small_config();
        c.fleet.n_buildings = 5;
        c.profile.peak_kw = 8.0;
        let data = prepare_day(&c).unwrap();
        let kind = ModelKind::AdjMoment;
        let inst = period_instance(&c, &data, kind, c.ambiguity_for(kind), 3, data.x0.clone()).unwrap();
        let opts = period_options(&c, &data, 3);
        let p = SolverParams::exact();
        let exact = solve_adjustable_moment(&inst, MomentMode::Exact, false, &opts, &p).unwrap();
        let bnc = solve_adjustable_moment(&inst, MomentMode::Bnc, false, &opts, &p).unwrap();
        if exact.alpha.unwrap() <= 0.75 {
            assert!((exact.objective.unwrap() - bnc.objective.unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn bench_gap_is_none_without_limit_hits() {
        let c = small_config();
        let run = run_sequential(&c, ModelKind::Deterministic).unwrap();
        let rows = bench_report(&[("x".into(), run)]);
        assert_eq!(rows[0].limit_hits, 0);
        assert_eq!(rows[0].mean_gap, None);
    }

    #[test]
    fn sweep_flags_decreasing_objective() {
        let row = |cost: f64, obj: f64, alpha: f64| SweepRow {
            kind: ModelKind::AdjWBigM,
            period: 0,
            label: "x".into(),
            cost,
            status: SolveStatus::Optimal,
            alpha: Some(alpha),
            objective: Some(obj),
        };
        assert!(sweep_violations(&[row(10.0, 5.0, 0.3), row(12.0, 5.5, 0.2)], 1e-9).is_empty());
        assert_eq!(sweep_violations(&[row(10.0, 5.0, 0.3), row(12.0, 4.0, 0.4)], 1e-9).len(), 2);
    }

    #[test]
    fn load_scan_matches_brute_force_and_milp3() {
        use crate::formulations::test_support::instance;
        use crate::scenario::Risk;
        use crate::verify::{brute_force_optimum, OracleOptions};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..12 {
            let n = 6;
            let totals: Vec<f64> = (0..8).map(|_| rng.random_range(2.0..18.0)).collect();
            let cost = rng.random_range(5.0..40.0);
            let amb = AmbiguitySpec::wasserstein(0.05, Risk::Adjustable { cost });
            let mut inst = instance(n, 3.5, &totals, amb);
            inst.x_prev = (0..n).map(|_| rng.random_range(22.0..24.0)).collect();
            let params = SolverParams::exact();
            let scan = solve_adjustable_wasserstein_scan(&inst, &params).unwrap().unwrap();
            let brute = brute_force_optimum(&inst, ModelKind::AdjWBigM, &OracleOptions::default()).unwrap();
            let milp3 = build(&inst, ModelKind::AdjWBigM, &BuildOptions::default()).unwrap().solve(&params);
            assert_eq!(scan.status, brute.status, "case {case}");
            if let Some(b) = brute.objective {
                assert!((scan.objective.unwrap() - b).abs() < 1e-7, "case {case}: {scan:?} vs {b}");
                assert!((milp3.objective.unwrap() - b).abs() < 1e-5, "case {case}: {milp3:?} vs {b}");
            }
        }
    }
}
