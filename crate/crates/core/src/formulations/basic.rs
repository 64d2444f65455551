use super::{add_skeleton, floor_alpha_n, omega_coefficient, PeriodInstance};
use crate::error::{Error, Result};
use crate::model_ir::{LinExpr, Model, Sense, VarId};

/// Deterministic model against a known PV output: `eta >= |load - pv|`.
pub fn build_deterministic(inst: &PeriodInstance, pv_known: f64) -> Result<Model> {
    if !(pv_known >= 0.0) {
        return Err(Error::InvalidInput(format!("known PV output must be nonnegative (got {pv_known})")));
    }
    let mut m = Model::new("det");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let eta_up = inst.fleet.max_load().max(pv_known);
    let eta = m.add_continuous("eta", 0.0, eta_up);
    m.add_constraint("pv_lo", sk.load.clone().with(eta, 1.0), Sense::Ge, pv_known);
    m.add_constraint("pv_hi", sk.load.clone().with(eta, -1.0), Sense::Le, pv_known);
    m.set_objective(sk.cost.with(eta, inst.fleet.c_pv));
    Ok(m)
}

/// Sample-average chance constraint with one violation indicator per sample.
pub fn build_cc_saa(inst: &PeriodInstance, ordering: bool) -> Result<Model> {
    let alpha = inst.require_alpha()?;
    let mut m = Model::new("cc");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let s = &inst.scenarios;
    let rho: Vec<VarId> = (0..s.len()).map(|n| m.add_binary(format!("cc_rho[{n}]"))).collect();
    for (n, &p) in s.totals.iter().enumerate() {
        // load >= P^n - M_n rho_n with M_n = P^n
        m.add_constraint(format!("cc_row[{n}]"), sk.load.clone().with(rho[n], p), Sense::Ge, p);
    }
    let p0 = s.probabilities[0];
    if s.probabilities.iter().all(|&p| (p - p0).abs() <= 1e-15) {
        let budget = floor_alpha_n(alpha, s.len()) as f64;
        let expr = rho.iter().fold(LinExpr::new(), |e, &r| e.with(r, 1.0));
        m.add_constraint("cc_budget", expr, Sense::Le, budget);
    } else {
        let expr = rho.iter().zip(&s.probabilities).fold(LinExpr::new(), |e, (&r, &p)| e.with(r, p));
        m.add_constraint("cc_budget", expr, Sense::Le, alpha);
    }
    if ordering {
        // a sample can only be violated if every larger sample is
        for (i, w) in inst.sorted.order.windows(2).enumerate() {
            m.add_constraint(format!("cc_order[{i}]"), LinExpr::var(rho[w[1]]).with(rho[w[0]], -1.0), Sense::Le, 0.0);
        }
    }
    m.set_objective(sk.cost);
    Ok(m)
}

/// Moment-based DRCC: `load >= theta + Omega sigma`.
pub fn build_drcc_moment(inst: &PeriodInstance) -> Result<Model> {
    let alpha = inst.require_alpha()?;
    let (g1, g2) = inst.require_gammas()?;
    let mut m = Model::new("drcc-m");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let threshold = inst.moments.theta + omega_coefficient(g1, g2, alpha) * inst.moments.sigma;
    m.add_constraint("dr_moment", sk.load, Sense::Ge, threshold);
    m.set_objective(sk.cost);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::scenario::{AmbiguitySpec, Risk};
    use crate::solver::{solve_mip, SolveStatus, SolverParams};

    fn moment(alpha: f64) -> AmbiguitySpec {
        AmbiguitySpec::moment(0.0, 1.0, Risk::Fixed { alpha })
    }

    #[test]
    fn deterministic_counts() {
        let inst = instance(100, 3.5, &[100.0, 120.0], moment(0.2));
        let m = build_deterministic(&inst, 110.0).unwrap();
        assert_eq!(m.num_binaries(), 100);
        assert_eq!(m.num_continuous(), 201);
    }

    #[test]
    fn deterministic_objective_arithmetic() {
        let inst = instance(2, 3.5, &[7.0], moment(0.2));
        let m = build_deterministic(&inst, 7.0).unwrap();
        let mut vals = vec![0.0; m.num_vars()];
        vals[0] = 1.0;
        vals[1] = 1.0;
        vals[4] = 0.2;
        vals[5] = 0.3;
        assert!((m.objective_value(&vals) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cc_budget_forces_zero_violations() {
        let inst = instance(4, 3.5, &[10.0, 8.0, 6.0, 4.0], moment(0.2));
        let m = build_cc_saa(&inst, false).unwrap();
        let r = solve_mip(&m, &SolverParams::exact(), &[]);
        assert_eq!(r.status, SolveStatus::Optimal);
        let rho = m.vars_with_prefix("cc_rho");
        assert!(rho.iter().all(|v| r.values[v.0] < 0.5));
        let load: f64 = r.values[..4].iter().map(|u| 3.5 * u).sum();
        assert!(load >= 10.0 - 1e-9);
    }

    #[test]
    fn cc_big_m_is_tight_at_zero_load() {
        let inst = instance(2, 3.5, &[200.0], moment(0.2));
        let m = build_cc_saa(&inst, true).unwrap();
        let row = m.linear.iter().find(|c| c.name == "cc_row[0]").unwrap();
        let mut vals = vec![0.0; m.num_vars()];
        vals[m.find_var("cc_rho[0]").unwrap().0] = 1.0;
        assert_eq!(row.activity(&vals) - row.rhs, 0.0);
        assert_eq!(m.num_binaries(), 3);
    }

    #[test]
    fn moment_row_threshold() {
        let mut inst = instance(100, 3.5, &[300.0], moment(0.2));
        inst.moments.theta = 300.0;
        inst.moments.sigma = 20.0;
        let m = build_drcc_moment(&inst).unwrap();
        let row = m.linear.iter().find(|c| c.name == "dr_moment").unwrap();
        assert!((row.rhs - 340.0).abs() < 1e-12);
        inst.moments.sigma = 0.0;
        let m = build_drcc_moment(&inst).unwrap();
        assert_eq!(m.linear.last().unwrap().rhs, 300.0);
    }

    #[test]
    fn moment_infeasible_threshold_is_a_solve_outcome() {
        let mut inst = instance(2, 3.5, &[10.0], moment(0.2));
        inst.moments.theta = 10.0;
        let m = build_drcc_moment(&inst).unwrap();
        assert_eq!(solve_mip(&m, &SolverParams::default(), &[]).status, SolveStatus::Infeasible);
    }
}
