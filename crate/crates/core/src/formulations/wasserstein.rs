use super::{add_skeleton, big_m1, floor_alpha_n, PeriodInstance};
use crate::error::{Error, Result};
use crate::model_ir::{LinExpr, Model, Sense, VarId};
use crate::scenario::SortedScenarios;

/// CVaR-based big-M reformulation with one indicator per sample.
pub fn build_drcc_w_milp1(inst: &PeriodInstance) -> Result<Model> {
    let alpha = inst.require_alpha()?;
    let delta = inst.require_delta()?;
    inst.require_capacity_margin()?;
    let mut m = Model::new("drcc-w1");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let s = &inst.scenarios;
    let n = s.len();
    let p0 = inst.sorted.p0;
    let gamma = m.add_continuous("w1_gamma", 0.0, p0);
    let z: Vec<VarId> = (0..n).map(|i| m.add_continuous(format!("w1_z[{i}]"), -p0, 0.0)).collect();
    let sv: Vec<VarId> = (0..n).map(|i| m.add_continuous(format!("w1_s[{i}]"), 0.0, p0)).collect();
    let y: Vec<VarId> = (0..n).map(|i| m.add_binary(format!("w1_y[{i}]"))).collect();

    let mut agg = LinExpr::term(gamma, alpha);
    for (&zi, &p) in z.iter().zip(&s.probabilities) {
        agg.add_term(zi, p);
    }
    m.add_constraint("w1_sum", agg, Sense::Ge, delta);
    for (i, &total) in s.totals.iter().enumerate() {
        let big = big_m1(p0, total);
        m.add_constraint(format!("w1_a[{i}]"), LinExpr::var(z[i]).with(gamma, 1.0).with(sv[i], -1.0), Sense::Le, 0.0);
        // s <= load - P^n + M (1 - y)
        let mut row = LinExpr::var(sv[i]).with(y[i], big);
        row.add_expr(&sk.load, -1.0);
        m.add_constraint(format!("w1_b[{i}]"), row, Sense::Le, big - total);
        m.add_constraint(format!("w1_c[{i}]"), LinExpr::var(sv[i]).with(y[i], -big), Sense::Le, 0.0);
        // s <= load - P^n y holds at y = 0 and y = 1 and dominates the big-M row
        let mut hull = LinExpr::var(sv[i]).with(y[i], total);
        hull.add_expr(&sk.load, -1.0);
        m.add_constraint(format!("w1x_hull[{i}]"), hull, Sense::Le, 0.0);
    }
    // y = 1 needs load >= P^n, so larger totals open only after smaller ones
    let order = &inst.sorted.order;
    for w in order.windows(2) {
        m.add_constraint(format!("w1x_order[{}]", w[0]), LinExpr::var(y[w[0]]).with(y[w[1]], -1.0), Sense::Le, 0.0);
    }
    m.set_objective(sk.cost);
    Ok(m)
}

/// Sorted-sample reformulation with `floor(alpha N) + 1` indicators, or one
/// fewer plus ordering rows when `strengthen` is set.
pub fn build_drcc_w_milp2(inst: &PeriodInstance, strengthen: bool) -> Result<Model> {
    let alpha = inst.require_alpha()?;
    let delta = inst.require_delta()?;
    inst.require_capacity_margin()?;
    let sorted = &inst.sorted;
    let mut m = Model::new("drcc-w2");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    add_milp2_rows(&mut m, "w2", &sk.load, sorted, alpha, delta, strengthen)?;
    m.set_objective(sk.cost);
    Ok(m)
}

/// Adds the sorted-sample rows for `load` under names starting with `prefix`.
pub(super) fn add_milp2_rows(
    m: &mut Model,
    prefix: &str,
    load: &LinExpr,
    sorted: &SortedScenarios,
    alpha: f64,
    delta: f64,
    strengthen: bool,
) -> Result<()> {
    let n = sorted.n();
    let k = floor_alpha_n(alpha, n);
    if k + 1 > n {
        return Err(Error::InvalidInput(format!(
            "risk level {alpha} is too large for {n} samples (needs floor(alpha N) < N)"
        )));
    }
    let p0 = sorted.p0;
    let pk1 = sorted.p(k + 1);
    let nf = n as f64;

    let a: Vec<VarId> = (1..=k + 1).map(|i| m.add_continuous(format!("{prefix}_a[{i}]"), 0.0, p0)).collect();
    let n_bin = if strengthen { k } else { k + 1 };
    let h: Vec<VarId> = (1..=n_bin).map(|i| m.add_binary(format!("{prefix}_h[{i}]"))).collect();

    let mut lhs = LinExpr::new();
    for &ai in &a[..k] {
        lhs.add_term(ai, 1.0 / nf);
    }
    lhs.add_term(a[k], (alpha - k as f64 / nf).max(0.0));
    m.add_constraint(format!("{prefix}_lhs"), lhs, Sense::Ge, delta);

    for (idx, &hi) in h.iter().enumerate() {
        let i = idx + 1;
        let p = sorted.p(i);
        let m2 = (p - pk1).max(0.0);
        let m1 = big_m1(p0, p);
        // a_n <= load - P^(n) + M2 (1 - h_n)
        let mut row = LinExpr::var(a[idx]).with(hi, m2);
        row.add_expr(load, -1.0);
        m.add_constraint(format!("{prefix}_b[{i}]"), row, Sense::Le, m2 - p);
        m.add_constraint(format!("{prefix}_c[{i}]"), LinExpr::var(a[idx]).with(hi, -m1), Sense::Le, 0.0);
    }
    if strengthen {
        // a_{k+1} = load - P^(k+1), with a_{k+1} >= 0 from its bound
        let mut row = LinExpr::var(a[k]);
        row.add_expr(load, -1.0);
        m.add_constraint(format!("{prefix}_eq"), row, Sense::Eq, -pk1);
        for i in 1..k {
            m.add_constraint(format!("{prefix}_ord[{i}]"), LinExpr::var(h[i - 1]).with(h[i], -1.0), Sense::Le, 0.0);
        }
    }
    Ok(())
}
