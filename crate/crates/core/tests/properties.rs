use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use drcc_core::formulations::{build, omega_coefficient, BuildOptions, ModelKind, PeriodInstance};
use drcc_core::lp_format::{parse_lp, to_lp_string};
use drcc_core::scenario::{empirical_moments, sort_totals, AmbiguitySpec, Risk, ScenarioSet, SigmaMode};
use drcc_core::solver::{solve_mip, SolveStatus, SolverParams};
use drcc_core::thermal::{BuildingParams, FleetModel};
use drcc_core::verify::{adj_wasserstein_min_alpha, wasserstein_lhs};

fn instance(n_hvac: usize, totals: &[f64], x_prev: f64, amb: AmbiguitySpec) -> PeriodInstance {
    let b = BuildingParams::given(0.9914, -0.6767, vec![4.3e-5, 0.0086], vec![5200.0, 32.0], 3.5).unwrap();
    let s = ScenarioSet::from_totals(0, totals).unwrap();
    let mo = empirical_moments(&s, SigmaMode::StdDev);
    PeriodInstance::new(FleetModel::homogeneous(n_hvac, b), vec![x_prev; n_hvac], s, mo, amb, 0).unwrap()
}

fn totals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..20.0, 2..15)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lhs_monotone_in_load_and_alpha(t in totals(), load in 0.0f64..30.0, step in 0.0f64..5.0, a in 0.05f64..0.9) {
        let s = sort_totals(&ScenarioSet::from_totals(0, &t).unwrap(), 35.0);
        prop_assert!(wasserstein_lhs(load + step, &s, a) >= wasserstein_lhs(load, &s, a) - 1e-12);
        prop_assert!(wasserstein_lhs(load, &s, (a + 0.05).min(1.0)) >= wasserstein_lhs(load, &s, a) - 1e-12);
    }

    #[test]
    fn min_alpha_non_increasing_in_load(t in totals(), load in 0.0f64..30.0, step in 0.0f64..5.0, delta in 0.01f64..1.0) {
        let s = sort_totals(&ScenarioSet::from_totals(0, &t).unwrap(), 35.0);
        let lo = adj_wasserstein_min_alpha(load, &s, delta, 1.0 - 1e-6);
        let hi = adj_wasserstein_min_alpha(load + step, &s, delta, 1.0 - 1e-6);
        if let Some(a) = lo {
            prop_assert!(hi.is_some_and(|b| b <= a + 1e-12));
        }
    }

    #[test]
    fn omega_non_increasing(g1 in 0.0f64..1.0, extra in 0.01f64..2.0, a in 0.01f64..0.98) {
        let g2 = g1 + extra;
        prop_assert!(omega_coefficient(g1, g2, a + 0.01) <= omega_coefficient(g1, g2, a) + 1e-12);
    }

    #[test]
    fn bounds_bracket_the_incumbent(t in totals(), x in 22.0f64..24.0, a in 0.1f64..0.4, d in 0.01f64..0.5) {
        let inst = instance(4, &t, x, AmbiguitySpec::wasserstein(d, Risk::Fixed { alpha: a }));
        if let Ok(built) = build(&inst, ModelKind::DrccW2, &BuildOptions::default()) {
            let r = built.solve(&SolverParams::default());
            if let (Some(ub), Some(lb)) = (r.objective, r.bound) {
                prop_assert!(lb <= ub + 1e-9);
                prop_assert!(built.model.max_violation(&r.values) <= 1e-6);
            }
        }
    }
}

#[test]
fn lp_text_round_trip_keeps_optimum() {
    let t = [4.0, 9.0, 6.5, 2.0, 7.5, 11.0];
    let cases = [
        (ModelKind::Deterministic, AmbiguitySpec::wasserstein(0.1, Risk::Fixed { alpha: 0.2 })),
        (ModelKind::ChanceSaa, AmbiguitySpec::wasserstein(0.1, Risk::Fixed { alpha: 0.3 })),
        (ModelKind::DrccMoment, AmbiguitySpec::moment(0.0, 1.0, Risk::Fixed { alpha: 0.4 })),
        (ModelKind::DrccW1, AmbiguitySpec::wasserstein(0.1, Risk::Fixed { alpha: 0.3 })),
        (ModelKind::DrccW2, AmbiguitySpec::wasserstein(0.1, Risk::Fixed { alpha: 0.3 })),
        (ModelKind::AdjWBigM, AmbiguitySpec::wasserstein(0.1, Risk::Adjustable { cost: 10.0 })),
        (ModelKind::AdjWFree, AmbiguitySpec::wasserstein(0.1, Risk::Adjustable { cost: 10.0 })),
    ];
    let params = SolverParams::exact();
    for (kind, amb) in cases {
        let inst = instance(4, &t, 23.0, amb);
        let model = build(&inst, kind, &BuildOptions::default()).unwrap().model;
        let text = to_lp_string(&model);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.num_vars(), model.num_vars(), "{kind}");
        assert_eq!(back.num_binaries(), model.num_binaries(), "{kind}");
        assert_eq!(back.linear.len(), model.linear.len(), "{kind}");
        assert_eq!(to_lp_string(&back), text, "{kind}");
        let (a, b) = (solve_mip(&model, &params, &[]), solve_mip(&back, &params, &[]));
        assert_eq!(a.status, b.status, "{kind}");
        if a.status == SolveStatus::Optimal {
            assert_abs_diff_eq!(a.objective.unwrap(), b.objective.unwrap(), epsilon = 1e-9);
        }
    }
}
