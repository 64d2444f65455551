//! Distributionally robust chance-constrained HVAC load control.
//!
//! Builders for the deterministic, sample-average, moment-based and
//! Wasserstein-based single-period load-control models (including the
//! adjustable-risk variants), an embedded branch-and-cut solver, brute-force
//! oracles, and a receding-horizon experiment harness.

// `!(x >= 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formulations;
pub mod harness;
pub mod lp_format;
pub mod model_ir;
pub mod scenario;
pub mod solver;
pub mod thermal;
pub mod verify;

pub use error::{Error, Result};
pub use model_ir::{LinExpr, Model, Sense, VarId, VarKind};
