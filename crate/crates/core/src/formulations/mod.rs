//! Builders translating a single-period instance into a [`Model`].
//!
//! Every single-period builder starts from the same skeleton, so the first
//! `N_HVAC` variables of every model are the ON/OFF decisions `u`, followed by
//! the temperatures `x` and the comfort deviations `beta`. Risk variables of
//! the adjustable models are always named `alpha`.

mod adjustable_moment;
mod adjustable_wasserstein;
mod basic;
mod fleet_size;
mod wasserstein;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_ir::{LinExpr, Model, Sense, VarId};
use crate::scenario::{capacity_exceeds_min_total, sort_totals, AmbiguityKind, AmbiguitySpec, MomentSummary, ScenarioSet, SortedScenarios};
use crate::solver::{solve_mip, LazyCuts, SolveResult, SolverParams};
use crate::thermal::FleetModel;

pub use adjustable_moment::{
    build_adj_socp1, build_adj_socp2, build_adj_socp3, tangent_cut, tangent_cut_coefficients, TangentCutGenerator,
};
pub use adjustable_wasserstein::{build_adj_w_milp3, build_adj_w_milp4, build_load_floor, ADJ_W_ALPHA_MAX};
pub use basic::{build_cc_saa, build_deterministic, build_drcc_moment};
pub use fleet_size::{build_fleet_size, FleetSizeOptions};
pub use wasserstein::{build_drcc_w_milp1, build_drcc_w_milp2};

/// Floor of `alpha * n` that tolerates representation error such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn floor_alpha_n(alpha: f64, n: usize) -> usize {
    (alpha * n as f64 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodInstance {
    pub fleet: FleetModel,
    pub x_prev: Vec<f64>,
    pub scenarios: ScenarioSet,
    pub sorted: SortedScenarios,
    pub moments: MomentSummary,
    pub ambiguity: AmbiguitySpec,
    pub period: usize,
}

impl PeriodInstance {
    pub fn new(
        fleet: FleetModel,
        x_prev: Vec<f64>,
        scenarios: ScenarioSet,
        moments: MomentSummary,
        ambiguity: AmbiguitySpec,
        period: usize,
    ) -> Result<Self> {
        let sorted = sort_totals(&scenarios, fleet.max_load());
        let inst = PeriodInstance { fleet, x_prev, scenarios, sorted, moments, ambiguity, period };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        self.scenarios.validate()?;
        self.ambiguity.validate()?;
        if self.x_prev.len() != self.fleet.len() {
            return Err(Error::InvalidInput(format!(
                "{} initial temperatures for {} buildings",
                self.x_prev.len(),
                self.fleet.len()
            )));
        }
        let tol = 1e-9;
        if let Some((i, x)) =
            self.x_prev.iter().enumerate().find(|(_, &x)| x < self.fleet.x_min - tol || x > self.fleet.x_max + tol)
        {
            return Err(Error::InvalidInput(format!(
                "initial temperature {x} of building {i} is outside [{}, {}]",
                self.fleet.x_min, self.fleet.x_max
            )));
        }
        Ok(())
    }

    pub fn n_hvac(&self) -> usize {
        self.fleet.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn delta(&self) -> Option<f64> {
        match self.ambiguity.kind {
            AmbiguityKind::Wasserstein { delta } => Some(delta),
            AmbiguityKind::Moment { .. } => None,
        }
    }

    pub fn gammas(&self) -> Option<(f64, f64)> {
        match self.ambiguity.kind {
            AmbiguityKind::Moment { gamma1, gamma2 } => Some((gamma1, gamma2)),
            AmbiguityKind::Wasserstein { .. } => None,
        }
    }

    fn require_alpha(&self) -> Result<f64> {
        self.ambiguity
            .alpha()
            .ok_or_else(|| Error::InvalidInput("this model needs a fixed risk level alpha".into()))
    }

    fn require_cost(&self) -> Result<f64> {
        self.ambiguity
            .risk_cost()
            .ok_or_else(|| Error::InvalidInput("this model needs an adjustable risk level with a cost".into()))
    }

    fn require_delta(&self) -> Result<f64> {
        self.delta().ok_or_else(|| Error::InvalidInput("this model needs a Wasserstein ambiguity set".into()))
    }

    fn require_gammas(&self) -> Result<(f64, f64)> {
        self.gammas().ok_or_else(|| Error::InvalidInput("this model needs a moment ambiguity set".into()))
    }

    fn require_capacity_margin(&self) -> Result<()> {
        if capacity_exceeds_min_total(&self.sorted) {
            Ok(())
        } else {
            Err(Error::DrInfeasible(format!(
                "period {}: fleet capacity {} kW does not exceed the smallest PV total {} kW",
                self.period,
                self.sorted.p0,
                self.sorted.sorted_totals.last().copied().unwrap_or(f64::NAN)
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "det")]
    Deterministic,
    #[serde(rename = "cc")]
    ChanceSaa,
    #[serde(rename = "drcc-m")]
    DrccMoment,
    #[serde(rename = "drcc-w1")]
    DrccW1,
    #[serde(rename = "drcc-w2")]
    DrccW2,
    #[serde(rename = "adj-m")]
    AdjMoment,
    #[serde(rename = "adj-w-bigm")]
    AdjWBigM,
    #[serde(rename = "adj-w-free")]
    AdjWFree,
    #[serde(rename = "fleet-size")]
    FleetSize,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Deterministic,
        ModelKind::ChanceSaa,
        ModelKind::DrccMoment,
        ModelKind::DrccW1,
        ModelKind::DrccW2,
        ModelKind::AdjMoment,
        ModelKind::AdjWBigM,
        ModelKind::AdjWFree,
        ModelKind::FleetSize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Deterministic => "det",
            ModelKind::ChanceSaa => "cc",
            ModelKind::DrccMoment => "drcc-m",
            ModelKind::DrccW1 => "drcc-w1",
            ModelKind::DrccW2 => "drcc-w2",
            ModelKind::AdjMoment => "adj-m",
            ModelKind::AdjWBigM => "adj-w-bigm",
            ModelKind::AdjWFree => "adj-w-free",
            ModelKind::FleetSize => "fleet-size",
        }
    }

    pub fn is_adjustable(self) -> bool {
        matches!(self, ModelKind::AdjMoment | ModelKind::AdjWBigM | ModelKind::AdjWFree)
    }

    pub fn uses_moments(self) -> bool {
        matches!(self, ModelKind::DrccMoment | ModelKind::AdjMoment)
    }

    pub fn uses_wasserstein(self) -> bool {
        matches!(self, ModelKind::DrccW1 | ModelKind::DrccW2 | ModelKind::AdjWBigM | ModelKind::AdjWFree)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
            Error::InvalidInput(format!("unknown model kind `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Which reformulation serves the adjustable moment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentBranch {
    #[default]
    Socp1,
    Socp2,
    Socp3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildOptions {
    /// Tightened big-M rows in the Wasserstein MILP.
    pub strengthen: bool,
    /// Ordering cuts on the sample-average violation indicators.
    pub cc_ordering: bool,
    /// PV forecast for the deterministic model; the sample mean when unset.
    pub pv_known: Option<f64>,
    pub alpha_lo_moment: f64,
    /// Upper end of the SOCP3 interval.
    pub alpha_hi_socp3: f64,
    pub moment_branch: MomentBranch,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            strengthen: true,
            cc_ordering: true,
            pv_known: None,
            alpha_lo_moment: 1e-4,
            alpha_hi_socp3: 0.75,
            moment_branch: MomentBranch::Socp1,
        }
    }
}

/// Big-M constants of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMSet {
    /// Per scenario, original order.
    pub m1: Vec<f64>,
    /// Per sorted index `n = 1..=k+1` (stored 0-based).
    pub m2: Vec<f64>,
    pub m_cc: Vec<f64>,
    /// Empty when no Wasserstein radius is given.
    pub m3: Vec<f64>,
    pub lambda_upper: Option<f64>,
}

/// `M1_n = max(|P0 - P^n|, P^n)`.
pub fn big_m1(p0: f64, total: f64) -> f64 {
    (p0 - total).abs().max(total)
}

pub fn big_m_values(sorted: &SortedScenarios, totals: &[f64], alpha: f64, delta: Option<f64>) -> Result<BigMSet> {
    if !capacity_exceeds_min_total(sorted) {
        return Err(Error::DrInfeasible("fleet capacity does not exceed the smallest PV total".into()));
    }
    let n = sorted.n();
    let k = floor_alpha_n(alpha, n);
    let m1: Vec<f64> = totals.iter().map(|&p| big_m1(sorted.p0, p)).collect();
    let m2 = if k < n {
        let pk1 = sorted.p(k + 1);
        (1..=k + 1).map(|i| (sorted.p(i) - pk1).max(0.0)).collect()
    } else {
        Vec::new()
    };
    let lambda_upper = delta.map(|d| 1.0 / d);
    let m3 = lambda_upper.map(|l| m1.iter().map(|m| l * m).collect()).unwrap_or_default();
    Ok(BigMSet { m1, m2, m_cc: totals.to_vec(), m3, lambda_upper })
}

/// Moment safety factor.
pub fn omega_coefficient(gamma1: f64, gamma2: f64, alpha: f64) -> f64 {
    if gamma1 / gamma2 <= alpha {
        gamma1.sqrt() + ((1.0 - alpha) * (gamma2 - gamma1) / alpha).sqrt()
    } else {
        (gamma2 / alpha).sqrt()
    }
}

/// Greedy CVaR weights: `1/N` for the first `k`, then `alpha - k/N`.
pub fn dual_pi(n: usize, alpha: f64) -> Vec<f64> {
    let k = floor_alpha_n(alpha, n).min(n);
    let mut pi = vec![0.0; n];
    for p in pi.iter_mut().take(k) {
        *p = 1.0 / n as f64;
    }
    if k < n {
        pi[k] = (alpha - k as f64 / n as f64).max(0.0);
    }
    pi
}

/// Handles into the shared single-period skeleton.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub u: Vec<VarId>,
    pub x: Vec<VarId>,
    pub beta: Vec<VarId>,
    /// Integer number of units ON, branched on before the `u`.
    pub n_on: VarId,
    /// `sum P_l u_l`.
    pub load: LinExpr,
    /// `c_sys sum beta + c_switch sum u`.
    pub cost: LinExpr,
}

/// Adds `u`, `x`, `beta`, the dynamics equalities, the absolute-value rows
/// and their secants, and fixes `u` where only one setting stays in band.
pub fn add_skeleton(m: &mut Model, fleet: &FleetModel, x_prev: &[f64]) -> Skeleton {
    let n = fleet.len();
    let u: Vec<VarId> = (0..n).map(|l| m.add_binary(format!("u[{l}]"))).collect();
    let x: Vec<VarId> = (0..n).map(|l| m.add_continuous(format!("x[{l}]"), fleet.x_min, fleet.x_max)).collect();
    let beta_up = (fleet.x_max - fleet.x_ref).max(fleet.x_ref - fleet.x_min);
    let beta: Vec<VarId> = (0..n).map(|l| m.add_continuous(format!("beta[{l}]"), 0.0, beta_up)).collect();
    let mut load = LinExpr::new();
    let mut cost = LinExpr::new();
    for (l, b) in fleet.buildings.iter().enumerate() {
        m.add_constraint(
            format!("dyn[{l}]"),
            LinExpr::var(x[l]).with(u[l], -b.b),
            Sense::Eq,
            b.a * x_prev[l] + b.disturbance(),
        );
        m.add_constraint(format!("dev_lo[{l}]"), LinExpr::var(x[l]).with(beta[l], 1.0), Sense::Ge, fleet.x_ref);
        m.add_constraint(format!("dev_hi[{l}]"), LinExpr::var(x[l]).with(beta[l], -1.0), Sense::Le, fleet.x_ref);
        // beta is convex in u with the binary points on this secant; the row
        // gives the convex hull of each building's (u, beta) pairs
        let x_off = b.a * x_prev[l] + b.disturbance();
        let x_on = x_off + b.b;
        let (d0, d1) = ((x_off - fleet.x_ref).abs(), (x_on - fleet.x_ref).abs());
        m.add_constraint(format!("sec[{l}]"), LinExpr::var(beta[l]).with(u[l], d0 - d1), Sense::Ge, d0);
        let inside = |x: f64| x >= fleet.x_min - 1e-9 && x <= fleet.x_max + 1e-9;
        match (inside(x_off), inside(x_on)) {
            (false, true) => m.variables[u[l].0].lower = 1.0,
            (true, false) => m.variables[u[l].0].upper = 0.0,
            _ => {}
        }
        load.add_term(u[l], b.power_kw);
        cost.add_term(beta[l], fleet.c_sys);
        cost.add_term(u[l], fleet.c_switch);
    }
    let n_on = m.add_integer("n_on", 0.0, n as f64);
    let mut count = LinExpr::term(n_on, -1.0);
    for &ul in &u {
        count.add_term(ul, 1.0);
    }
    m.add_constraint("count", count, Sense::Eq, 0.0);
    Skeleton { u, x, beta, n_on, load, cost }
}

/// Risk variable `alpha` in `[lo, hi]`, priced at `cost` in the objective.
fn add_alpha(m: &mut Model, obj: &mut LinExpr, lo: f64, hi: f64, cost: f64) -> VarId {
    let a = m.add_continuous("alpha", lo, hi);
    obj.add_term(a, cost);
    a
}

/// A model plus the problem-specific lazy cuts it needs.
pub struct Built {
    pub model: Model,
    pub lazy: Vec<Box<dyn LazyCuts>>,
}

impl fmt::Debug for Built {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Built").field("model", &self.model.to_string()).field("lazy", &self.lazy.len()).finish()
    }
}

impl Built {
    pub fn plain(model: Model) -> Self {
        Built { model, lazy: Vec::new() }
    }

    pub fn solve(&self, params: &SolverParams) -> SolveResult {
        let lazy: Vec<&dyn LazyCuts> = self.lazy.iter().map(|g| g.as_ref()).collect();
        solve_mip(&self.model, params, &lazy)
    }
}

/// Builds the single-period model of `kind`.
pub fn build(inst: &PeriodInstance, kind: ModelKind, opts: &BuildOptions) -> Result<Built> {
    Ok(match kind {
        ModelKind::Deterministic => {
            let pv = opts.pv_known.unwrap_or_else(|| mean_total(&inst.scenarios));
            Built::plain(build_deterministic(inst, pv)?)
        }
        ModelKind::ChanceSaa => Built::plain(build_cc_saa(inst, opts.cc_ordering)?),
        ModelKind::DrccMoment => Built::plain(build_drcc_moment(inst)?),
        ModelKind::DrccW1 => Built::plain(build_drcc_w_milp1(inst)?),
        ModelKind::DrccW2 => Built::plain(build_drcc_w_milp2(inst, opts.strengthen)?),
        ModelKind::AdjMoment => match opts.moment_branch {
            MomentBranch::Socp1 => Built::plain(build_adj_socp1(inst, opts.alpha_lo_moment)?),
            MomentBranch::Socp2 => Built::plain(build_adj_socp2(inst, opts.alpha_lo_moment)?),
            MomentBranch::Socp3 => {
                let (model, gen) = build_adj_socp3(inst, opts.alpha_lo_moment, opts.alpha_hi_socp3)?;
                Built { model, lazy: vec![Box::new(gen)] }
            }
        },
        ModelKind::AdjWBigM => Built::plain(build_adj_w_milp3(inst)?),
        ModelKind::AdjWFree => Built::plain(build_adj_w_milp4(inst)?),
        ModelKind::FleetSize => {
            return Err(Error::InvalidInput("fleet-size is a multi-period model; use build_fleet_size".into()))
        }
    })
}

/// Probability-weighted mean of the scenario totals.
pub fn mean_total(s: &ScenarioSet) -> f64 {
    s.totals.iter().zip(&s.probabilities).map(|(t, p)| t * p).sum()
}

/// ON/OFF decisions of a solution (the first `n` variables of every
/// single-period model).
pub fn schedule_from(values: &[f64], n: usize) -> Vec<u8> {
    values.iter().take(n).map(|&v| u8::from(v > 0.5)).collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::scenario::{empirical_moments, Risk, SigmaMode};
    use crate::thermal::BuildingParams;

    pub fn fleet(n: usize, power: f64) -> FleetModel {
        let b = BuildingParams::given(0.9914, -0.6767, vec![1.0], vec![0.3], power).unwrap();
        FleetModel::homogeneous(n, b)
    }

    pub fn instance(n_hvac: usize, power: f64, totals: &[f64], ambiguity: AmbiguitySpec) -> PeriodInstance {
        let f = fleet(n_hvac, power);
        let s = ScenarioSet::from_totals(0, totals).unwrap();
        let mo = empirical_moments(&s, SigmaMode::StdDev);
        PeriodInstance::new(f, vec![23.0; n_hvac], s, mo, ambiguity, 0).unwrap()
    }

    pub fn wass(delta: f64, alpha: f64) -> AmbiguitySpec {
        AmbiguitySpec::wasserstein(delta, Risk::Fixed { alpha })
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::scenario::Risk;

    #[test]
    fn omega_hand_values() {
        assert!((omega_coefficient(0.0, 1.0, 0.2) - 2.0).abs() < 1e-12);
        assert!((omega_coefficient(0.0, 1.0, 0.5) - 1.0).abs() < 1e-12);
        assert!((omega_coefficient(0.5, 1.0, 0.2) - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn omega_continuous_at_switch_and_monotone() {
        let (g1, g2) = (0.3, 1.5);
        let a0 = g1 / g2;
        let left = omega_coefficient(g1, g2, a0 - 1e-10);
        let right = omega_coefficient(g1, g2, a0);
        assert!((left - right).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let o = omega_coefficient(g1, g2, i as f64 / 100.0);
            assert!(o <= prev + 1e-12);
            prev = o;
        }
    }

    #[test]
    fn dual_pi_examples() {
        let pi = dual_pi(10, 0.25);
        let want = [0.1, 0.1, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in pi.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let pi = dual_pi(10, 0.05);
        assert!((pi[0] - 0.05).abs() < 1e-15);
        assert!(pi[1..].iter().all(|&p| p == 0.0));
        for &(n, a) in &[(7, 0.33), (100, 0.29), (10, 0.3)] {
            assert!((dual_pi(n, a).iter().sum::<f64>() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_tolerates_representation_error() {
        assert_eq!(floor_alpha_n(0.29, 100), 29);
        assert_eq!(floor_alpha_n(0.3, 10), 3);
        assert_eq!(floor_alpha_n(0.05, 10), 0);
    }

    #[test]
    fn big_m_examples() {
        assert_eq!(big_m1(350.0, 200.0), 200.0);
        let inst = instance(100, 3.5, &[200.0, 150.0, 100.0, 50.0], wass(0.02, 0.3));
        let bm = big_m_values(&inst.sorted, &inst.scenarios.totals, 0.3, Some(0.02)).unwrap();
        assert_eq!(bm.m1[0], 200.0);
        assert_eq!(bm.lambda_upper, Some(50.0));
        assert_eq!(bm.m3[0], 50.0 * 200.0);
        // k = 1: M2 = (P(1) - P(2), 0)
        assert_eq!(bm.m2, vec![50.0, 0.0]);
    }

    #[test]
    fn big_m_rejects_fleet_below_every_total() {
        let inst = instance(2, 1.0, &[5.0, 4.0], wass(0.02, 0.3));
        assert!(matches!(
            big_m_values(&inst.sorted, &inst.scenarios.totals, 0.3, None),
            Err(Error::DrInfeasible(_))
        ));
    }

    #[test]
    fn kinds_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("milp9".parse::<ModelKind>().is_err());
    }

    #[test]
    fn skeleton_layout() {
        let inst = instance(3, 3.5, &[4.0, 2.0], AmbiguitySpec::moment(0.0, 1.0, Risk::Fixed { alpha: 0.2 }));
        let mut m = Model::new("t");
        let sk = add_skeleton(&mut m, &inst.fleet, &inst.x_prev);
        assert_eq!(sk.u, vec![VarId(0), VarId(1), VarId(2)]);
        assert_eq!(m.num_binaries(), 3);
        assert!(m.var(sk.n_on).is_integer());
        // dynamics, two absolute-value rows and a secant per unit, plus the count
        assert_eq!(m.linear.len(), 13);
    }
}
