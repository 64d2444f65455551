use super::{add_alpha, add_skeleton, PeriodInstance};
use crate::error::{Error, Result};
use crate::model_ir::{mccormick_product, LinExpr, LinearConstraint, Model, Sense, VarId};
use crate::solver::LazyCuts;

/// `sqrt((1 - alpha) / alpha)`.
fn tail_ratio(alpha: f64) -> f64 {
    ((1.0 - alpha) / alpha).sqrt()
}

/// Slope and intercept of the tangent to `sqrt((1-a)/a)` at `a_hat`.
pub fn tangent_cut_coefficients(a_hat: f64) -> (f64, f64) {
    let s = (1.0 - a_hat).powf(-0.5);
    let slope = -0.5 * s * a_hat.powf(-1.5);
    let intercept = s * a_hat.powf(-0.5) * (1.5 - a_hat);
    (slope, intercept)
}

/// `r >= slope * alpha + intercept` as a row.
pub fn tangent_cut(alpha: VarId, r: VarId, a_hat: f64, name: &str) -> LinearConstraint {
    let (slope, intercept) = tangent_cut_coefficients(a_hat);
    LinearConstraint { name: name.into(), terms: vec![(alpha, -slope), (r, 1.0)], sense: Sense::Ge, rhs: intercept }
}

/// Lazy hyperplanes enforcing `r >= sqrt((1-alpha)/alpha)` at candidates.
#[derive(Debug, Clone)]
pub struct TangentCutGenerator {
    pub alpha: VarId,
    pub r: VarId,
    pub tol: f64,
}

impl LazyCuts for TangentCutGenerator {
    fn separate(&self, _model: &Model, x: &[f64]) -> Vec<LinearConstraint> {
        let a_hat = x[self.alpha.0];
        let r_hat = x[self.r.0];
        let f = tail_ratio(a_hat);
        // the LP enforces rows to a tolerance relative to their largest
        // coefficient, so the threshold scales with the tangent slope too
        let (slope, _) = tangent_cut_coefficients(a_hat);
        if r_hat >= f - self.tol * (1.0 + f).max(slope.abs()) {
            return Vec::new();
        }
        vec![tangent_cut(self.alpha, self.r, a_hat, "m3_tangent")]
    }
}

/// Adds `phi, q, w` with `alpha phi >= q^2`, `phi >= w^2`, `q w >= 1`, so that
/// `phi >= 1/sqrt(alpha)`.
fn add_inverse_sqrt(m: &mut Model, prefix: &str, alpha: VarId, alpha_lo: f64) -> VarId {
    let phi_max = 1.0 / alpha_lo.sqrt();
    let root = phi_max.sqrt();
    let phi = m.add_continuous(format!("{prefix}_phi"), 1.0, phi_max);
    let q = m.add_continuous(format!("{prefix}_q"), 0.0, root);
    let w = m.add_continuous(format!("{prefix}_w"), 0.0, root);
    m.add_cone(
        format!("{prefix}_aphi"),
        vec![LinExpr::var(alpha).with(phi, -1.0), LinExpr::term(q, 2.0)],
        LinExpr::var(alpha).with(phi, 1.0),
    );
    m.add_cone(
        format!("{prefix}_wsq"),
        vec![LinExpr::term(w, 2.0), LinExpr::var(phi).plus(-1.0)],
        LinExpr::var(phi).plus(1.0),
    );
    m.add_cone(format!("{prefix}_qw"), vec![LinExpr::var(q).with(w, -1.0), LinExpr::constant(2.0)], LinExpr::var(q).with(w, 1.0));
    phi
}

/// Adjustable moment model on `alpha in [gamma1/gamma2, 1]`.
///
/// `d` is stored in units of `P0^2` (fleet capacity squared).
pub fn build_adj_socp1(inst: &PeriodInstance, alpha_lo: f64) -> Result<Model> {
    let cost = inst.require_cost()?;
    let (g1, g2) = inst.require_gammas()?;
    let mut m = Model::new("adj-m-socp1");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let mut obj = sk.cost.clone();
    let alpha = add_alpha(&mut m, &mut obj, (g1 / g2).max(alpha_lo), 1.0, cost);

    let scale = inst.fleet.max_load();
    let (theta, sigma) = (inst.moments.theta / scale, inst.moments.sigma / scale);
    let shift = theta + sigma * g1.sqrt();
    let constant = theta * theta + 2.0 * theta * sigma * g1.sqrt() + g2 * sigma * sigma;
    let d = m.add_continuous("m1_d", 0.0, 1.0 + constant);
    m.add_cone(
        "m1_cone",
        vec![LinExpr::constant(2.0 * sigma * (g2 - g1).sqrt()), LinExpr::var(alpha).with(d, -1.0)],
        LinExpr::var(alpha).with(d, 1.0),
    );

    let powers: Vec<f64> = inst.fleet.powers().iter().map(|p| p / scale).collect();
    let n = powers.len();
    let mut expand = LinExpr::var(d);
    for i in 0..n {
        for j in 0..n {
            let g = mccormick_product(&mut m, &format!("m1_g[{i},{j}]"), sk.u[i], sk.u[j], 1.0)?;
            expand.add_term(g, -powers[i] * powers[j]);
        }
        expand.add_term(sk.u[i], 2.0 * shift * powers[i]);
    }
    m.add_constraint("m1_expand", expand, Sense::Le, constant);
    m.add_constraint("m1_thresh", sk.load, Sense::Ge, inst.moments.theta + inst.moments.sigma * g1.sqrt());
    m.set_objective(obj);
    Ok(m)
}

/// Adjustable moment model on `alpha in [alpha_lo, gamma1/gamma2]`.
pub fn build_adj_socp2(inst: &PeriodInstance, alpha_lo: f64) -> Result<Model> {
    let cost = inst.require_cost()?;
    let (g1, g2) = inst.require_gammas()?;
    let hi = g1 / g2;
    if hi < alpha_lo {
        return Err(Error::EmptyBranch(format!("alpha interval [{alpha_lo}, {hi}] is empty")));
    }
    let mut m = Model::new("adj-m-socp2");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let mut obj = sk.cost.clone();
    let alpha = add_alpha(&mut m, &mut obj, alpha_lo, hi, cost);
    let phi = add_inverse_sqrt(&mut m, "m2", alpha, alpha_lo);
    let mut row = sk.load.clone();
    row.add_term(phi, -inst.moments.sigma * g2.sqrt());
    m.add_constraint("m2_thresh", row, Sense::Ge, inst.moments.theta);
    m.set_objective(obj);
    Ok(m)
}

/// Outer approximation on `alpha in [gamma1/gamma2, alpha_hi]`, exact once
/// the returned generator's hyperplanes hold at the incumbent.
pub fn build_adj_socp3(inst: &PeriodInstance, alpha_lo: f64, alpha_hi: f64) -> Result<(Model, TangentCutGenerator)> {
    let cost = inst.require_cost()?;
    let (g1, g2) = inst.require_gammas()?;
    let lo = (g1 / g2).max(alpha_lo);
    if !(alpha_hi <= 0.75) {
        return Err(Error::InvalidInput(format!("tangent cuts are only valid for alpha <= 0.75 (got {alpha_hi})")));
    }
    if lo > alpha_hi {
        return Err(Error::EmptyBranch(format!("alpha interval [{lo}, {alpha_hi}] is empty")));
    }
    let mut m = Model::new("adj-m-socp3");
    m.period = Some(inst.period);
    let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
    let mut obj = sk.cost.clone();
    let alpha = add_alpha(&mut m, &mut obj, lo, alpha_hi, cost);
    let r = m.add_continuous("m3_r", 0.0, tail_ratio(lo));
    let phi = add_inverse_sqrt(&mut m, "m3", alpha, lo);
    let mut row = sk.load.clone();
    row.add_term(r, -inst.moments.sigma * (g2 - g1).sqrt());
    m.add_constraint("m3_thresh", row, Sense::Ge, inst.moments.theta + inst.moments.sigma * g1.sqrt());
    m.add_constraint("m3_rphi", LinExpr::term(r, 2.0).with(phi, -1.0), Sense::Ge, 0.0);
    // a few initial tangents; the generator adds the rest on demand
    for (i, a_hat) in [0.05, 0.1, 0.2, 0.35, 0.5, 0.75].into_iter().filter(|&a| a >= lo).enumerate() {
        let c = tangent_cut(alpha, r, a_hat, &format!("m3_init[{i}]"));
        m.linear.push(c);
    }
    m.set_objective(obj);
    Ok((m, TangentCutGenerator { alpha, r, tol: 1e-7 }))
}
