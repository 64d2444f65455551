use serde::{Deserialize, Serialize};

use super::wasserstein::add_milp2_rows;
use super::{floor_alpha_n, omega_coefficient, PeriodInstance};
use crate::error::{Error, Result};
use crate::model_ir::{LinExpr, Model, Sense, VarId};
use crate::scenario::AmbiguityKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetSizeOptions {
    /// Upper bound `N_U` on the number of enrolled units.
    pub max_units: f64,
    /// Cost `c_N` per enrolled unit.
    pub unit_cost: f64,
    pub strengthen: bool,
}

impl Default for FleetSizeOptions {
    fn default() -> Self {
        FleetSizeOptions { max_units: 100.0, unit_cost: 1.0, strengthen: true }
    }
}

/// Multi-period model that also chooses which units take part.
///
/// Excluded units (`zeta = 0`) are held at `x_ref` with `u = 0`. Each period
/// carries its own DR rows: the moment threshold or the sorted-sample
/// Wasserstein block.
pub fn build_fleet_size(periods: &[PeriodInstance], opts: &FleetSizeOptions) -> Result<Model> {
    let first = periods.first().ok_or_else(|| Error::InvalidInput("fleet-size model needs at least one period".into()))?;
    if !(opts.max_units >= 1.0) {
        return Err(Error::InvalidInput(format!("max_units must be at least 1 (got {})", opts.max_units)));
    }
    let fleet = &first.fleet;
    for p in periods {
        if p.fleet != *fleet {
            return Err(Error::InvalidInput(format!("period {} uses a different fleet", p.period)));
        }
        if std::mem::discriminant(&p.ambiguity.kind) != std::mem::discriminant(&first.ambiguity.kind) {
            return Err(Error::InvalidInput(format!("period {} mixes ambiguity kinds", p.period)));
        }
        p.require_alpha()?;
    }
    let n_p = periods.len();
    let n = fleet.len();
    let mut m = Model::new("fleet-size");
    let zeta: Vec<VarId> = (0..n).map(|l| m.add_binary(format!("zeta[{l}]"))).collect();
    let n_units = m.add_continuous("n_hvac", 0.0, opts.max_units);
    let mut obj = LinExpr::term(n_units, opts.unit_cost);
    let beta_up = (fleet.x_max - fleet.x_ref).max(fleet.x_ref - fleet.x_min);

    let mut u = vec![Vec::with_capacity(n); n_p];
    let mut x = vec![Vec::with_capacity(n); n_p];
    for t in 0..n_p {
        for l in 0..n {
            u[t].push(m.add_binary(format!("u[{t},{l}]")));
            x[t].push(m.add_continuous(format!("x[{t},{l}]"), fleet.x_min, fleet.x_max));
        }
    }
    let x_ref = fleet.x_ref;
    for (t, inst) in periods.iter().enumerate() {
        let mut load = LinExpr::new();
        for (l, b) in fleet.buildings.iter().enumerate() {
            let beta = m.add_continuous(format!("beta[{t},{l}]"), 0.0, beta_up);
            let gv = b.disturbance();
            if t == 0 {
                // x = A x0 zeta + B u + Gv zeta + (1 - zeta) x_ref
                let row = LinExpr::var(x[0][l]).with(u[0][l], -b.b).with(zeta[l], -(b.a * first.x_prev[l] + gv - x_ref));
                m.add_constraint(format!("temp[0,{l}]"), row, Sense::Eq, x_ref);
            } else {
                // x = A (x_prev - x_ref + x_ref zeta) + B u + Gv zeta + (1 - zeta) x_ref
                let row = LinExpr::var(x[t][l])
                    .with(x[t - 1][l], -b.a)
                    .with(u[t][l], -b.b)
                    .with(zeta[l], -(b.a * x_ref + gv - x_ref));
                m.add_constraint(format!("temp[{t},{l}]"), row, Sense::Eq, x_ref - b.a * x_ref);
            }
            m.add_constraint(format!("dev_lo[{t},{l}]"), LinExpr::var(x[t][l]).with(beta, 1.0), Sense::Ge, x_ref);
            m.add_constraint(format!("dev_hi[{t},{l}]"), LinExpr::var(x[t][l]).with(beta, -1.0), Sense::Le, x_ref);
            obj.add_term(beta, fleet.c_sys);
            obj.add_term(u[t][l], fleet.c_switch);
            load.add_term(u[t][l], b.power_kw);
        }
        let alpha = inst.require_alpha()?;
        match inst.ambiguity.kind {
            AmbiguityKind::Moment { gamma1, gamma2 } => {
                let threshold = inst.moments.theta + omega_coefficient(gamma1, gamma2, alpha) * inst.moments.sigma;
                m.add_constraint(format!("dr_moment[{t}]"), load, Sense::Ge, threshold);
            }
            AmbiguityKind::Wasserstein { delta } => {
                inst.require_capacity_margin()?;
                debug_assert!(floor_alpha_n(alpha, inst.sorted.n()) < inst.sorted.n());
                add_milp2_rows(&mut m, &format!("fs{t}"), &load, &inst.sorted, alpha, delta, opts.strengthen)?;
            }
        }
    }
    for l in 0..n {
        let mut total = LinExpr::new();
        for ut in &u {
            total.add_term(ut[l], 1.0);
        }
        m.add_constraint(format!("link_lo[{l}]"), total.clone().with(zeta[l], -1.0), Sense::Ge, 0.0);
        m.add_constraint(format!("link_hi[{l}]"), total.with(zeta[l], -(n_p as f64)), Sense::Le, 0.0);
    }
    let cap = zeta.iter().fold(LinExpr::term(n_units, -1.0), |e, &z| e.with(z, 1.0));
    m.add_constraint("capacity", cap, Sense::Le, 0.0);
    m.set_objective(obj);
    Ok(m)
}
