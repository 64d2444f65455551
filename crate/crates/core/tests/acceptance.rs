//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines always reach the output.
//! `--ignored` also runs the checks known to fail by construction; any other
//! argument is a substring filter on the criterion name.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use drcc_core::config::RunConfig;
use drcc_core::formulations::{
    build, build_adj_socp1, build_adj_socp3, build_adj_w_milp3, build_adj_w_milp4, build_drcc_moment,
    build_drcc_w_milp1, build_drcc_w_milp2, floor_alpha_n, omega_coefficient, tangent_cut_coefficients, BuildOptions,
    Built, ModelKind, PeriodInstance,
};
use drcc_core::harness::{
    evaluate_out_of_sample, out_of_sample_sets, prepare_day, run_sequential_with, sweep_risk_cost, sweep_setup,
    sweep_violations, SWEEP_TOL,
};
use drcc_core::scenario::{empirical_moments, AmbiguitySpec, Risk, ScenarioSet, SigmaMode};
use drcc_core::solver::{solve_lp, solve_mip, LpStatus, SolveResult, SolveStatus, SolverParams};
use drcc_core::thermal::{BuildingParams, FleetModel};
use drcc_core::verify::{
    brute_force_optimum, cvar_primal_lp, greedy_dual_value, verify_result, wasserstein_feasible, wasserstein_lhs,
    OracleOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// tolerances and sizes, fixed here
const EQUIV_TOL: f64 = 1e-6;
const EQUIV_INSTANCES: usize = 72;
const EQUIV_BUDGET_S: f64 = 120.0;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_CASES: usize = 1000;
const MOMENT_TOL: f64 = 1e-7;
const MOMENT_INSTANCES: usize = 60;
const ADJ_W_TOL: f64 = 1e-5;
const ADJ_W_INSTANCES: usize = 24;
const ADJ_M_TOL: f64 = 1e-4;
const ADJ_M_INSTANCES: usize = 20;
const ADJ_M_ALPHA_HI: f64 = 0.75;
const TANGENT_TOL: f64 = 1e-9;
const TANGENT_POINTS: usize = 1000;
const ORDER_SHARE: f64 = 0.70;
const P95_TARGET: f64 = 0.8;
const P95_SHARE: f64 = 0.90;
const MILP2_PERIOD_S: f64 = 5.0;
const LOAD_TOL_KW: f64 = 1e-6;
const HONESTY_TOL: f64 = 1e-7;
const HONESTY_CASES: usize = 200;
const HONESTY_MAX_BINARIES: usize = 12;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn building() -> BuildingParams {
    BuildingParams::given(0.9914, -0.6767, vec![4.3e-5, 0.0086], vec![5200.0, 32.0], 3.5).unwrap()
}

/// Random period: temperatures across the band (some units forced) and PV
/// totals spread over the fleet capacity.
fn random_instance(rng: &mut ChaCha8Rng, n_hvac: usize, n: usize, ambiguity: AmbiguitySpec) -> PeriodInstance {
    let fleet = FleetModel::homogeneous(n_hvac, building());
    let cap = fleet.max_load();
    let x_prev = (0..n_hvac).map(|_| rng.random_range(21.8..24.45)).collect();
    let totals: Vec<f64> = (0..n).map(|_| rng.random_range(0.1 * cap..0.95 * cap)).collect();
    let s = ScenarioSet::from_totals(0, &totals).unwrap();
    let mo = empirical_moments(&s, SigmaMode::StdDev);
    PeriodInstance::new(fleet, x_prev, s, mo, ambiguity, 0).unwrap()
}

fn objectives_agree(a: &SolveResult, b: &SolveResult, tol: f64) -> bool {
    match (a.status, b.status) {
        (SolveStatus::Infeasible, SolveStatus::Infeasible) => true,
        (SolveStatus::Optimal, SolveStatus::Optimal) => {
            (a.objective.unwrap() - b.objective.unwrap()).abs() <= tol * (1.0 + b.objective.unwrap().abs())
        }
        _ => false,
    }
}

fn equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let params = SolverParams::exact();
    let combos: Vec<(usize, usize, f64, f64)> = [10, 20, 30]
        .iter()
        .flat_map(|&n| {
            [4, 8].iter().flat_map(move |&h| {
                [0.1, 0.2, 0.3].iter().flat_map(move |&a| [0.02, 0.2].iter().map(move |&d| (n, h, a, d)))
            })
        })
        .collect();
    let mut feasible = 0;
    for i in 0..EQUIV_INSTANCES {
        let (n, h, alpha, delta) = combos[i % combos.len()];
        let inst = random_instance(&mut rng, h, n, AmbiguitySpec::wasserstein(delta, Risk::Fixed { alpha }));
        let brute = brute_force_optimum(&inst, ModelKind::DrccW1, &OracleOptions::default()).unwrap();
        let runs = [
            ("milp1", solve_mip(&build_drcc_w_milp1(&inst).unwrap(), &params, &[])),
            ("milp2", solve_mip(&build_drcc_w_milp2(&inst, false).unwrap(), &params, &[])),
            ("milp2-strong", solve_mip(&build_drcc_w_milp2(&inst, true).unwrap(), &params, &[])),
        ];
        for (name, r) in &runs {
            if !objectives_agree(r, &brute, EQUIV_TOL) {
                return Err(format!("instance {i} (N={n}, units={h}, alpha={alpha}, delta={delta}): {name} {:?} {:?} vs brute {:?}", r.status, r.objective, brute.objective));
            }
        }
        feasible += usize::from(brute.status == SolveStatus::Optimal);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < EQUIV_BUDGET_S,
        format!("{EQUIV_INSTANCES} instances ({feasible} feasible) agree within {EQUIV_TOL:e}; {secs:.1} s (< {EQUIV_BUDGET_S} s)"),
    )
}

fn oracle_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let params = SolverParams::exact();
    let mut worst: f64 = 0.0;
    let mut feasible = 0;
    for case in 0..ORACLE_CASES {
        let n = rng.random_range(5..=25);
        let h = rng.random_range(2..=8);
        let alpha = rng.random_range(0.05..0.6);
        let delta = rng.random_range(0.0..1.0);
        let mut inst = random_instance(&mut rng, h, n, AmbiguitySpec::wasserstein(delta, Risk::Fixed { alpha }));
        // keep both settings inside the band so only the DR rows decide
        inst.x_prev = vec![23.0; h];
        let u: Vec<u8> = (0..h).map(|_| rng.random_range(0..=1)).collect();
        let load = inst.fleet.load(&u);
        let a: Vec<f64> = inst.sorted.sorted_totals.iter().map(|p| (load - p).max(0.0)).collect();
        let lhs = wasserstein_lhs(load, &inst.sorted, alpha);
        let lp = solve_lp(&cvar_primal_lp(&a, alpha));
        if lp.status != LpStatus::Optimal {
            return Err(format!("case {case}: primal LP {:?}", lp.status));
        }
        let gap = (lp.objective + lhs).abs().max((greedy_dual_value(&a, alpha) - lhs).abs());
        worst = worst.max(gap);
        if gap > ORACLE_TOL {
            return Err(format!("case {case}: LP/dual gap {gap:e}"));
        }
        let verdict = wasserstein_feasible(load, &inst.sorted, alpha, delta);
        let mut m = build_drcc_w_milp2(&inst, true).unwrap();
        for (l, &ul) in u.iter().enumerate() {
            m.variables[l].lower = f64::from(ul);
            m.variables[l].upper = f64::from(ul);
        }
        let r = solve_mip(&m, &params, &[]);
        let milp_feasible = r.status == SolveStatus::Optimal;
        if milp_feasible != verdict.feasible {
            return Err(format!("case {case}: oracle {} vs fixed-u MILP {:?} ({})", verdict.feasible, r.status, verdict.detail));
        }
        feasible += usize::from(milp_feasible);
    }
    Ok(format!("{ORACLE_CASES} cases ({feasible} feasible), worst strong-duality gap {worst:.1e} <= {ORACLE_TOL:e}, fixed-u verdicts identical"))
}

fn moment_suite() -> Outcome {
    let hand = [((0.0, 1.0, 0.2), 2.0), ((0.0, 1.0, 0.5), 1.0), ((0.5, 1.0, 0.2), 5f64.sqrt())];
    for ((g1, g2, a), want) in hand {
        let got = omega_coefficient(g1, g2, a);
        if (got - want).abs() > 1e-12 {
            return Err(format!("omega({g1}, {g2}, {a}) = {got}, expected {want}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = SolverParams::exact();
    let mut feasible = 0;
    for i in 0..MOMENT_INSTANCES {
        let h = rng.random_range(3..=10);
        let n = rng.random_range(5..=30);
        let alpha = rng.random_range(0.05..0.5);
        let g1 = [0.0, 0.1, 0.5][i % 3];
        let g2 = [1.0, 1.0, 2.0][i % 3];
        let inst = random_instance(&mut rng, h, n, AmbiguitySpec::moment(g1, g2, Risk::Fixed { alpha }));
        let r = solve_mip(&build_drcc_moment(&inst).unwrap(), &params, &[]);
        let brute = brute_force_optimum(&inst, ModelKind::DrccMoment, &OracleOptions::default()).unwrap();
        if !objectives_agree(&r, &brute, MOMENT_TOL) {
            return Err(format!("instance {i}: {:?} {:?} vs brute {:?}", r.status, r.objective, brute.objective));
        }
        feasible += usize::from(r.status == SolveStatus::Optimal);
    }
    Ok(format!("omega hand values 2, 1, sqrt(5); {MOMENT_INSTANCES} instances ({feasible} feasible) within {MOMENT_TOL:e}"))
}

fn adjustable_wasserstein() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let params = SolverParams::exact();
    let mut worst: f64 = 0.0;
    for i in 0..ADJ_W_INSTANCES {
        let h = rng.random_range(2..=6);
        let n = rng.random_range(3..=10);
        let delta = rng.random_range(0.02..0.5);
        let cost = rng.random_range(2.0..30.0);
        let inst = random_instance(&mut rng, h, n, AmbiguitySpec::wasserstein(delta, Risk::Adjustable { cost }));
        let r3 = solve_mip(&build_adj_w_milp3(&inst).unwrap(), &params, &[]);
        let r4 = solve_mip(&build_adj_w_milp4(&inst).unwrap(), &params, &[]);
        let brute = brute_force_optimum(&inst, ModelKind::AdjWBigM, &OracleOptions::default()).unwrap();
        for (name, r) in [("milp3", &r3), ("milp4", &r4)] {
            if !objectives_agree(r, &brute, ADJ_W_TOL) {
                return Err(format!("instance {i}: {name} {:?} {:?} vs brute {:?}", r.status, r.objective, brute.objective));
            }
        }
        if let (Some(a), Some(b)) = (r3.objective, r4.objective) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(format!("{ADJ_W_INSTANCES} instances: MILP3, MILP4 and brute force agree (worst |MILP3 - MILP4| {worst:.1e} <= {ADJ_W_TOL:e})"))
}

fn adjustable_moment() -> Outcome {
    // tangent exactness and validity
    for &a_hat in &[0.01, 0.05, 0.2, 0.5, 0.75] {
        let (slope, intercept) = tangent_cut_coefficients(a_hat);
        let f = |a: f64| ((1.0 - a) / a).sqrt();
        let at = slope * a_hat + intercept;
        if (at - f(a_hat)).abs() > TANGENT_TOL {
            return Err(format!("cut at {a_hat}: {at} vs {}", f(a_hat)));
        }
        for i in 1..=TANGENT_POINTS {
            let a = ADJ_M_ALPHA_HI * i as f64 / TANGENT_POINTS as f64;
            if slope * a + intercept > f(a) + TANGENT_TOL {
                return Err(format!("cut from {a_hat} above the curve at {a}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let params = SolverParams::exact();
    let (mut matched, mut tried, mut worst) = (0, 0, 0.0f64);
    while matched < ADJ_M_INSTANCES && tried < 20 * ADJ_M_INSTANCES {
        tried += 1;
        let h = rng.random_range(3..=8);
        let n = rng.random_range(5..=20);
        let cost = rng.random_range(20.0..200.0);
        let inst = random_instance(&mut rng, h, n, AmbiguitySpec::moment(0.0, 1.0, Risk::Adjustable { cost }));
        let r1 = solve_mip(&build_adj_socp1(&inst, 1e-4).unwrap(), &params, &[]);
        if r1.status != SolveStatus::Optimal || r1.alpha.is_none_or(|a| a > ADJ_M_ALPHA_HI) {
            continue;
        }
        let (model, generator) = build_adj_socp3(&inst, 1e-4, ADJ_M_ALPHA_HI).unwrap();
        let r3 = Built { model, lazy: vec![Box::new(generator)] }.solve(&params);
        if r3.status != SolveStatus::Optimal {
            return Err(format!("instance {tried}: SOCP3 {:?}", r3.status));
        }
        let d = (r1.objective.unwrap() - r3.objective.unwrap()).abs();
        worst = worst.max(d);
        if d > ADJ_M_TOL {
            return Err(format!("instance {tried}: SOCP1 {:?} vs SOCP3 {:?}", r1.objective, r3.objective));
        }
        matched += 1;
    }
    check(
        matched >= ADJ_M_INSTANCES,
        format!("{matched} instances with alpha* <= {ADJ_M_ALPHA_HI} (of {tried}), worst gap {worst:.1e} <= {ADJ_M_TOL:e}; tangents exact and valid at {TANGENT_POINTS} points"),
    )
}

fn model_sizes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let n = 100;
    let h = 100;
    let mut notes = Vec::new();
    for &alpha in &[0.05, 0.15, 0.2, 0.37] {
        let inst = random_instance(&mut rng, h, n, AmbiguitySpec::wasserstein(0.02, Risk::Fixed { alpha }));
        let m1 = build_drcc_w_milp1(&inst).unwrap();
        let rows1 = m1.rows_with_prefix("w1_a") + m1.rows_with_prefix("w1_b") + m1.rows_with_prefix("w1_c");
        let bins1 = m1.num_binaries() - h;
        let m2 = build_drcc_w_milp2(&inst, false).unwrap();
        let k = floor_alpha_n(alpha, n);
        let rows2 = m2.rows_with_prefix("w2_b") + m2.rows_with_prefix("w2_c");
        let bins2 = m2.num_binaries() - h;
        if rows1 != 3 * n || bins1 != n || rows2 != 2 * k + 2 || bins2 != k + 1 {
            return Err(format!("alpha {alpha}: MILP1 {rows1} rows/{bins1} bins, MILP2 {rows2} rows/{bins2} bins (k={k})"));
        }
        notes.push(format!("k={k}"));
    }
    let inst = random_instance(&mut rng, h, n, AmbiguitySpec::wasserstein(0.02, Risk::Adjustable { cost: 10.0 }));
    let m3 = build_adj_w_milp3(&inst).unwrap();
    let bins3 = m3.num_binaries() - h;
    let rows3 = m3.rows_with_prefix("w3_a") + m3.rows_with_prefix("w3_b") + m3.rows_with_prefix("w3_c");
    check(
        bins3 == n && rows3 == 3 * n,
        format!("MILP1 3N rows / N binaries; MILP2 2k+2 rows / k+1 binaries ({}); MILP3 3N indicator rows / N binaries", notes.join(", ")),
    )
}

/// The printed count for MILP3 is 3N binaries; the model has one binary per
/// sample (the other two per-sample variables are continuous).
fn milp3_literal_binaries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let inst = random_instance(&mut rng, 100, 100, AmbiguitySpec::wasserstein(0.02, Risk::Adjustable { cost: 10.0 }));
    let m3 = build_adj_w_milp3(&inst).unwrap();
    let bins = m3.num_binaries() - 100;
    check(bins == 300, format!("MILP3 adds {bins} binaries for N = 100, literal count 300"))
}

fn desk_day() -> Outcome {
    let cfg = RunConfig::default();
    let data = prepare_day(&cfg).map_err(|e| e.to_string())?;
    let run = |kind| run_sequential_with(&cfg, &data, kind).map_err(|e| e.to_string());
    let (m, w, cc) = (run(ModelKind::DrccMoment)?, run(ModelKind::DrccW2)?, run(ModelKind::ChanceSaa)?);
    for r in [&m, &w, &cc] {
        if !r.all_solved() {
            return Err(format!("{}: some period has no solution", r.kind));
        }
        if r.comfort_violations() > 0 {
            return Err(format!("{}: {} temperatures outside the band", r.kind, r.comfort_violations()));
        }
    }
    let t = m.periods.len();
    let ordered = (0..t)
        .filter(|&i| {
            let (lm, lw, lc) = (m.periods[i].load_kw, w.periods[i].load_kw, cc.periods[i].load_kw);
            lm >= lw - LOAD_TOL_KW && lw >= lc - LOAD_TOL_KW
        })
        .count();
    let sets = out_of_sample_sets(&cfg, &data.profile).map_err(|e| e.to_string())?;
    let report = evaluate_out_of_sample(&m, &sets);
    let high = report.p95.iter().filter(|&&p| p >= P95_TARGET).count();
    let per_period = w.total_cpu() / t as f64;
    let worst = w.periods.iter().map(|p| p.result.wall_time).fold(0.0, f64::max);
    let detail = format!(
        "{t} periods solved, band kept; ordering M >= W >= CC in {ordered}/{t}; DRCC-M p95 >= {P95_TARGET} in {high}/{t}; MILP2 {per_period:.3} s/period (max {worst:.3} s)"
    );
    check(
        ordered as f64 >= ORDER_SHARE * t as f64 && high as f64 >= P95_SHARE * t as f64 && worst <= MILP2_PERIOD_S,
        detail,
    )
}

fn adjustable_sweep() -> Outcome {
    let cfg = RunConfig::default();
    let mut total = 0;
    let mut optimal = 0;
    for kind in [ModelKind::AdjMoment, ModelKind::AdjWBigM] {
        let (c, data, x_prev) = sweep_setup(&cfg, kind).map_err(|e| e.to_string())?;
        let rows = sweep_risk_cost(&c, &data, kind, &c.sweep.costs, &c.sweep_periods(), &x_prev).map_err(|e| e.to_string())?;
        let bad = sweep_violations(&rows, SWEEP_TOL);
        if !bad.is_empty() {
            return Err(format!("{kind}: {}", bad.join("; ")));
        }
        total += rows.len();
        optimal += rows.iter().filter(|r| r.status == SolveStatus::Optimal).count();
    }
    check(optimal == total, format!("{total} sweep points ({optimal} optimal), 0 monotonicity violations (tol {SWEEP_TOL:e})"))
}

fn solver_honesty() -> Outcome {
    let kinds = [
        ModelKind::Deterministic,
        ModelKind::ChanceSaa,
        ModelKind::DrccMoment,
        ModelKind::DrccW1,
        ModelKind::DrccW2,
        ModelKind::AdjWBigM,
        ModelKind::AdjWFree,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let params = SolverParams::exact();
    let opts = BuildOptions::default();
    let oracle = OracleOptions::default();
    let (mut cases, mut incumbents) = (0, 0);
    while cases < HONESTY_CASES {
        let kind = kinds[cases % kinds.len()];
        let h = rng.random_range(1..=6);
        let n = rng.random_range(2..=6);
        let risk = if kind.is_adjustable() {
            Risk::Adjustable { cost: rng.random_range(1.0..40.0) }
        } else {
            Risk::Fixed { alpha: rng.random_range(0.1..0.5) }
        };
        let amb = if kind.uses_moments() {
            AmbiguitySpec::moment(0.0, 1.0, risk)
        } else {
            AmbiguitySpec::wasserstein(rng.random_range(0.01..0.5), risk)
        };
        let inst = random_instance(&mut rng, h, n, amb);
        let built = build(&inst, kind, &opts).map_err(|e| format!("{kind}: {e}"))?;
        if built.model.num_binaries() > HONESTY_MAX_BINARIES {
            continue;
        }
        let r = built.solve(&params);
        let again = built.solve(&params);
        if r.values != again.values || r.objective != again.objective || r.nodes != again.nodes {
            return Err(format!("case {cases} ({kind}): repeated solves differ"));
        }
        let brute = brute_force_optimum(&inst, kind, &oracle).map_err(|e| e.to_string())?;
        if !objectives_agree(&r, &brute, HONESTY_TOL) {
            return Err(format!("case {cases} ({kind}): {:?} {:?} vs brute {:?}", r.status, r.objective, brute.objective));
        }
        if r.has_incumbent() {
            let v = verify_result(&inst, kind, &r, &oracle).map_err(|e| e.to_string())?;
            if !v.feasible {
                return Err(format!("case {cases} ({kind}): incumbent rejected: {}", v.detail));
            }
            incumbents += 1;
        }
        cases += 1;
    }
    Ok(format!("{cases} cases with <= {HONESTY_MAX_BINARIES} binaries match brute force within {HONESTY_TOL:e}; {incumbents} incumbents verified; repeated solves identical"))
}

struct Criterion {
    name: &'static str,
    ignored: bool,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "1 equivalence", ignored: false, run: equivalence },
        Criterion { name: "2 oracle identity", ignored: false, run: oracle_identity },
        Criterion { name: "3 moment suite", ignored: false, run: moment_suite },
        Criterion { name: "4 adjustable wasserstein", ignored: false, run: adjustable_wasserstein },
        Criterion { name: "5 adjustable moment", ignored: false, run: adjustable_moment },
        Criterion { name: "6 model sizes", ignored: false, run: model_sizes },
        Criterion { name: "6 milp3 literal 3N binaries", ignored: true, run: milp3_literal_binaries },
        Criterion { name: "7 desk day", ignored: false, run: desk_day },
        Criterion { name: "8 adjustable sweep", ignored: false, run: adjustable_sweep },
        Criterion { name: "9 solver honesty", ignored: false, run: solver_honesty },
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include_ignored = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| c.name.starts_with(f.as_str())) {
            continue;
        }
        if c.ignored && !include_ignored {
            println!("IGNORED criterion {} (known to fail; run with --ignored)", c.name);
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {detail} [{secs:.1} s]", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {detail} [{secs:.1} s]", c.name);
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
