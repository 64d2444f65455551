//! Embedded LP and branch-and-cut solver over [`Model`].

mod bnb;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::model_ir::{LinearConstraint, Model};

pub use bnb::solve_mip;
pub use simplex::{solve_lp, LpSolution, LpSolver, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    #[default]
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub max_cone_cuts_per_node: usize,
    pub branching: Branching,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            abs_gap: 1e-9,
            rel_gap: 1e-6,
            int_tol: 1e-6,
            feas_tol: 1e-8,
            time_limit: None,
            node_limit: None,
            max_cone_cuts_per_node: 30,
            branching: Branching::MostFractional,
            seed: 0,
        }
    }
}

impl SolverParams {
    /// Tight gaps for cross-checks against exact oracles.
    pub fn exact() -> Self {
        SolverParams { abs_gap: 1e-10, rel_gap: 1e-10, ..Self::default() }
    }

    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [
            ("abs_gap", self.abs_gap),
            ("rel_gap", self.rel_gap),
            ("int_tol", self.int_tol),
            ("feas_tol", self.feas_tol),
        ] {
            if !(v > 0.0) {
                return Err(crate::Error::config(format!("solver.{name}"), "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped with an incumbent but without a proof of the gap target, for
    /// example after an LP failure in some subtree.
    FeasibleGap,
    Infeasible,
    /// Time or node limit reached.
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Incumbent assignment indexed by variable id (empty when none).
    pub values: Vec<f64>,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub cuts: usize,
    pub alpha: Option<f64>,
}

impl SolveResult {
    pub fn infeasible(wall_time: f64, nodes: usize) -> Self {
        SolveResult {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective: None,
            bound: None,
            gap: None,
            wall_time,
            nodes,
            lp_iterations: 0,
            cuts: 0,
            alpha: None,
        }
    }

    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// `(UB - LB) / max(|UB|, 1e-10)`.
pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    ((ub - lb) / ub.abs().max(1e-10)).max(0.0)
}

/// Problem-specific cuts checked at integral candidates.
pub trait LazyCuts: Send + Sync {
    /// Cuts violated by `x`; empty when `x` is acceptable.
    fn separate(&self, model: &Model, x: &[f64]) -> Vec<LinearConstraint>;
}
