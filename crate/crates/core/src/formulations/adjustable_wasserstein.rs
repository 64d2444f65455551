use super::{add_alpha, add_skeleton, big_m1, PeriodInstance};
use crate::error::Result;
use crate::model_ir::{mccormick_product, LinExpr, Model, Sense, VarId};

/// Upper end of the adjustable Wasserstein risk level. At exactly 1 the
/// chance constraint is vacuous (`lambda = 0` satisfies the CVaR set) while
/// the sorted-sample form is not, so both models stop just short of it.
pub const ADJ_W_ALPHA_MAX: f64 = 1.0 - 1e-6;

/// Adjustable Wasserstein model through the `lambda`-scaled CVaR set, with
/// `w_l = u_l lambda` linearized.
pub fn build_adj_w_milp3(inst: &PeriodInstance) -> Result<Model> {
    let cost = inst.require_cost()?;
    let delta = inst.require_delta()?;
    inst.require_capacity_margin()?;
    let mut m = Model::new("adj-w-bigm");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let s = &inst.scenarios;
    let n = s.len();
    let p0 = inst.sorted.p0;
    let lambda_up = 1.0 / delta;

    let mut obj = sk.cost.clone();
    let alpha = add_alpha(&mut m, &mut obj, 1.0 / n as f64, ADJ_W_ALPHA_MAX, cost);
    let lambda = m.add_continuous("w3_lambda", 0.0, lambda_up);
    let mut scaled_load = LinExpr::new();
    for (l, b) in inst.fleet.buildings.iter().enumerate() {
        let w = mccormick_product(&mut m, &format!("w3_w[{l}]"), sk.u[l], lambda, lambda_up)?;
        scaled_load.add_term(w, b.power_kw);
    }
    let z: Vec<VarId> = (0..n).map(|i| m.add_continuous(format!("w3_z[{i}]"), -1.0, 0.0)).collect();
    let m3: Vec<f64> = s.totals.iter().map(|&p| lambda_up * big_m1(p0, p)).collect();
    let sv: Vec<VarId> = (0..n).map(|i| m.add_continuous(format!("w3_s[{i}]"), 0.0, m3[i])).collect();
    let y: Vec<VarId> = (0..n).map(|i| m.add_binary(format!("w3_y[{i}]"))).collect();

    // delta lambda - alpha <= sum p_n z_n
    let mut agg = LinExpr::var(alpha).with(lambda, -delta);
    for (&zi, &p) in z.iter().zip(&s.probabilities) {
        agg.add_term(zi, p);
    }
    m.add_constraint("w3_sum", agg, Sense::Ge, 0.0);
    for (i, &total) in s.totals.iter().enumerate() {
        m.add_constraint(format!("w3_a[{i}]"), LinExpr::var(z[i]).with(sv[i], -1.0), Sense::Le, -1.0);
        // s <= sum P w - P^n lambda + M3 (1 - y)
        let mut row = LinExpr::var(sv[i]).with(lambda, total).with(y[i], m3[i]);
        row.add_expr(&scaled_load, -1.0);
        m.add_constraint(format!("w3_b[{i}]"), row, Sense::Le, m3[i]);
        m.add_constraint(format!("w3_c[{i}]"), LinExpr::var(sv[i]).with(y[i], -m3[i]), Sense::Le, 0.0);
    }
    // strengthening: y = 0 forces z = -1; an open sample needs the load
    // above its total (y is free to be 0 when lambda = 0); and opening a
    // sample opens every smaller one
    for (i, &total) in s.totals.iter().enumerate() {
        m.add_constraint(format!("w3x_zy[{i}]"), LinExpr::var(z[i]).with(y[i], -1.0), Sense::Le, -1.0);
        let mut link = sk.load.clone();
        link.add_term(y[i], -total);
        m.add_constraint(format!("w3x_link[{i}]"), link, Sense::Ge, 0.0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.totals[b].total_cmp(&s.totals[a]));
    for w in order.windows(2) {
        m.add_constraint(format!("w3x_order[{}]", w[0]), LinExpr::var(y[w[0]]).with(y[w[1]], -1.0), Sense::Le, 0.0);
    }
    m.set_objective(obj);
    Ok(m)
}

/// Thermal part of the adjustable models with at least `min_on` units ON.
/// Its optimum is the cheapest schedule whose load reaches `min_on` units.
pub fn build_load_floor(inst: &PeriodInstance, min_on: usize) -> Result<Model> {
    let mut m = Model::new("load-floor");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    m.add_constraint("floor", LinExpr::var(sk.n_on), Sense::Ge, min_on as f64);
    m.set_objective(sk.cost);
    Ok(m)
}

/// Big-M-free adjustable Wasserstein model selecting one (load bracket,
/// alpha bracket) pair through `Delta[j,k]`.
pub fn build_adj_w_milp4(inst: &PeriodInstance) -> Result<Model> {
    let cost = inst.require_cost()?;
    let delta = inst.require_delta()?;
    inst.require_capacity_margin()?;
    let sorted = &inst.sorted;
    let n = sorted.n();
    let nf = n as f64;
    let mut m = Model::new("adj-w-free");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let mut obj = sk.cost.clone();
    let alpha = add_alpha(&mut m, &mut obj, 1.0 / nf, ADJ_W_ALPHA_MAX, cost);
    let powers = inst.fleet.powers();

    let mut lhs = LinExpr::new();
    let mut select = LinExpr::new();
    let mut k_lo = LinExpr::term(alpha, -nf);
    let mut k_hi = LinExpr::term(alpha, -nf);
    let mut load_lo = LinExpr::new();
    load_lo.add_expr(&sk.load, -1.0);
    let mut load_hi = load_lo.clone();

    for j in 1..=n {
        for k in (j - 1)..n {
            let tag = format!("{j},{k}");
            let d = m.add_binary(format!("w4_D[{tag}]"));
            let eps = mccormick_product(&mut m, &format!("w4_eps[{tag}]"), d, alpha, 1.0)?;
            let pk1 = sorted.p(k + 1);
            let shift = (j - 1) as f64 / nf;
            let tail: f64 = (j..=k).map(|i| pk1 - sorted.p(i)).sum::<f64>() / nf;
            lhs.add_term(d, -tail - pk1 * shift);
            lhs.add_term(eps, pk1);
            for (l, &p) in powers.iter().enumerate() {
                let tau = mccormick_product(&mut m, &format!("w4_tau[{l},{tag}]"), sk.u[l], d, 1.0)?;
                let o = mccormick_product(&mut m, &format!("w4_o[{l},{tag}]"), sk.u[l], eps, 1.0)?;
                lhs.add_term(o, -p);
                lhs.add_term(tau, p * shift);
            }
            select.add_term(d, 1.0);
            k_lo.add_term(d, k as f64);
            k_hi.add_term(d, (k + 1) as f64);
            load_lo.add_term(d, sorted.p(j));
            load_hi.add_term(d, sorted.p(j - 1));
        }
    }
    m.add_constraint("w4_lhs", lhs, Sense::Le, -delta);
    m.add_constraint("w4_select", select, Sense::Eq, 1.0);
    m.add_constraint("w4_alpha_lo", k_lo, Sense::Le, 0.0);
    m.add_constraint("w4_alpha_hi", k_hi, Sense::Ge, 0.0);
    m.add_constraint("w4_load_lo", load_lo, Sense::Le, 0.0);
    m.add_constraint("w4_load_hi", load_hi, Sense::Ge, 0.0);
    m.set_objective(obj);
    Ok(m)
}
