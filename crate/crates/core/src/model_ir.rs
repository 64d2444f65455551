//! Solver-agnostic intermediate representation for mixed-binary linear and
//! second-order-cone models.
//!
//! Every builder in [`crate::formulations`] produces a [`Model`]; the
//! embedded solver in [`crate::solver`] consumes it. Models are immutable
//! once built and can be shared read-only across threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients smaller than this are dropped during canonicalization.
pub const COEF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    /// General integer with finite bounds.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }

    pub fn is_integer(&self) -> bool {
        self.kind != VarKind::Continuous
    }
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        LinExpr { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn with(mut self, v: VarId, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.terms.push((v, c * scale));
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>() + self.constant
    }

    /// Merges duplicate variables, drops tiny coefficients and sorts by id.
    pub fn canonicalize(&self) -> LinExpr {
        let mut acc: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *acc.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: acc.into_iter().filter(|(_, c)| c.abs() >= COEF_EPS).collect(),
            constant: self.constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// `sum(terms) sense rhs`. Constants in the builder expression are moved to
/// the right-hand side when the row is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Signed violation: positive when the row is violated.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => a - self.rhs,
            Sense::Ge => self.rhs - a,
            Sense::Eq => (a - self.rhs).abs(),
        }
    }

    /// The row as one or two `<=` rows `(terms, rhs)`.
    pub fn as_le_rows(&self) -> Vec<(Vec<(VarId, f64)>, f64)> {
        let neg = || self.terms.iter().map(|&(v, c)| (v, -c)).collect::<Vec<_>>();
        match self.sense {
            Sense::Le => vec![(self.terms.clone(), self.rhs)],
            Sense::Ge => vec![(neg(), -self.rhs)],
            Sense::Eq => vec![(self.terms.clone(), self.rhs), (neg(), -self.rhs)],
        }
    }
}

/// `||vector||_2 <= bound` with affine entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub name: String,
    pub vector: Vec<LinExpr>,
    pub bound: LinExpr,
}

impl SocConstraint {
    pub fn norm_at(&self, values: &[f64]) -> f64 {
        self.vector.iter().map(|e| e.eval(values).powi(2)).sum::<f64>().sqrt()
    }

    /// `||v(x)|| - s(x)`; positive means violated.
    pub fn violation(&self, values: &[f64]) -> f64 {
        self.norm_at(values) - self.bound.eval(values)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub name: String,
    pub period: Option<usize>,
    pub variables: Vec<Variable>,
    pub linear: Vec<LinearConstraint>,
    pub cones: Vec<SocConstraint>,
    /// Always minimized.
    pub objective: LinExpr,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Model { name: name.into(), ..Default::default() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous | VarKind::Integer => (lower, upper),
        };
        debug_assert!(lower <= upper, "empty domain for variable");
        self.variables.push(Variable { name: name.into(), kind, lower, upper });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Integer, lower, upper)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    /// Adds `expr sense rhs`; any constant in `expr` is moved to the rhs.
    pub fn add_constraint(&mut self, name: impl Into<String>, expr: LinExpr, sense: Sense, rhs: f64) -> usize {
        let canon = expr.canonicalize();
        self.linear.push(LinearConstraint {
            name: name.into(),
            terms: canon.terms,
            sense,
            rhs: rhs - canon.constant,
        });
        self.linear.len() - 1
    }

    pub fn add_cone(&mut self, name: impl Into<String>, vector: Vec<LinExpr>, bound: LinExpr) -> usize {
        self.cones.push(SocConstraint {
            name: name.into(),
            vector: vector.iter().map(LinExpr::canonicalize).collect(),
            bound: bound.canonicalize(),
        });
        self.cones.len() - 1
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = expr.canonicalize();
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.is_binary()).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.variables.iter().filter(|v| !v.is_integer()).count()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn vars_with_prefix(&self, prefix: &str) -> Vec<VarId> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.name.starts_with(prefix))
            .map(|(i, _)| VarId(i))
            .collect()
    }

    pub fn rows_with_prefix(&self, prefix: &str) -> usize {
        self.linear.iter().filter(|c| c.name.starts_with(prefix)).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Checks declared ids, bound sanity and finiteness of coefficients.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(Error::InvalidModel(format!("variable {} has bounds [{}, {}]", v.name, v.lower, v.upper)));
            }
            if v.is_binary() && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidModel(format!("binary {} has bounds outside [0,1]", v.name)));
            }
            if v.kind == VarKind::Integer && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(Error::InvalidModel(format!("integer {} needs finite bounds", v.name)));
            }
        }
        let check_terms = |owner: &str, terms: &[(VarId, f64)]| -> Result<()> {
            for &(v, c) in terms {
                if v.0 >= n {
                    return Err(Error::InvalidModel(format!("{owner} references undeclared variable {}", v.0)));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidModel(format!("{owner} has non-finite coefficient on {}", self.variables[v.0].name)));
                }
            }
            Ok(())
        };
        for c in &self.linear {
            check_terms(&c.name, &c.terms)?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidModel(format!("row {} has non-finite rhs", c.name)));
            }
        }
        for k in &self.cones {
            if k.vector.is_empty() {
                return Err(Error::InvalidModel(format!("cone {} has an empty norm argument", k.name)));
            }
            for e in k.vector.iter().chain(std::iter::once(&k.bound)) {
                check_terms(&k.name, &e.terms)?;
            }
        }
        check_terms("objective", &self.objective.terms)?;
        Ok(())
    }

    /// Maximum violation of bounds, rows and cones at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.linear {
            worst = worst.max(c.violation(values));
        }
        for k in &self.cones {
            worst = worst.max(k.violation(values));
        }
        worst
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} vars ({} binary), {} rows, {} cones",
            self.name,
            self.num_vars(),
            self.num_binaries(),
            self.linear.len(),
            self.cones.len()
        )
    }
}

/// Adds `w = x * y` for binary `x` and `y` in `[0, y_upper]` through the four
/// McCormick rows (`w >= 0` is emitted as a row as well as a bound); exact
/// whenever `x` is integral.
pub fn mccormick_product(m: &mut Model, name: &str, x: VarId, y: VarId, y_upper: f64) -> Result<VarId> {
    if !y_upper.is_finite() || y_upper < 0.0 {
        return Err(Error::InvalidModel(format!(
            "McCormick product needs a finite nonnegative upper bound on {} (got {y_upper})",
            m.var(y).name
        )));
    }
    if !m.var(x).is_binary() {
        return Err(Error::InvalidModel(format!("McCormick factor {} must be binary", m.var(x).name)));
    }
    let yv = m.var(y);
    if yv.lower < 0.0 || yv.upper > y_upper {
        return Err(Error::InvalidModel(format!(
            "{} has bounds [{}, {}] outside [0, {y_upper}]",
            yv.name, yv.lower, yv.upper
        )));
    }
    let w = m.add_continuous(name, 0.0, y_upper);
    m.add_constraint(format!("{name}_nn"), LinExpr::var(w), Sense::Ge, 0.0);
    // w >= y - (1 - x) yU
    m.add_constraint(format!("{name}_lo"), LinExpr::var(w).with(y, -1.0).with(x, -y_upper), Sense::Ge, -y_upper);
    // w <= yU x
    m.add_constraint(format!("{name}_ux"), LinExpr::var(w).with(x, -y_upper), Sense::Le, 0.0);
    // w <= y
    m.add_constraint(format!("{name}_uy"), LinExpr::var(w).with(y, -1.0), Sense::Le, 0.0);
    Ok(w)
}

/// Supporting-hyperplane cut `g^T v(x) <= s(x)` of a violated cone at `point`.
///
/// Returns `None` when `||v(point)|| <= s(point) + tol`. At the apex
/// (`v(point) = 0`) the first unit vector is used as the subgradient.
pub fn soc_linearization_cut(cone: &SocConstraint, point: &[f64], tol: f64) -> Option<LinearConstraint> {
    let norm = cone.norm_at(point);
    let s = cone.bound.eval(point);
    if norm <= s + tol {
        return None;
    }
    Some(soc_gradient_cut(cone, point))
}

/// The gradient cut at `point`, emitted unconditionally.
pub fn soc_gradient_cut(cone: &SocConstraint, point: &[f64]) -> LinearConstraint {
    let vals: Vec<f64> = cone.vector.iter().map(|e| e.eval(point)).collect();
    let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
    let grad: Vec<f64> = if norm > 1e-14 {
        vals.iter().map(|v| v / norm).collect()
    } else {
        let mut g = vec![0.0; vals.len()];
        g[0] = 1.0;
        g
    };
    let mut expr = LinExpr::new();
    for (g, e) in grad.iter().zip(&cone.vector) {
        if *g != 0.0 {
            expr.add_expr(e, *g);
        }
    }
    expr.add_expr(&cone.bound, -1.0);
    let canon = expr.canonicalize();
    LinearConstraint {
        name: format!("{}_oa", cone.name),
        terms: canon.terms,
        sense: Sense::Le,
        rhs: -canon.constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotated_pair() -> (Model, VarId, VarId) {
        let mut m = Model::new("t");
        let q = m.add_continuous("q", 0.0, f64::INFINITY);
        let w = m.add_continuous("w", 0.0, f64::INFINITY);
        // q + w >= ||(q - w, 2)||
        m.add_cone(
            "k",
            vec![LinExpr::var(q).with(w, -1.0), LinExpr::constant(2.0)],
            LinExpr::var(q).with(w, 1.0),
        );
        (m, q, w)
    }

    #[test]
    fn cut_at_half_half_is_q_plus_w_ge_2() {
        let (m, q, w) = rotated_pair();
        let cut = soc_linearization_cut(&m.cones[0], &[0.5, 0.5], 1e-9).expect("violated");
        // 2 - q - w <= 0
        assert_eq!(cut.sense, Sense::Le);
        let coef = |v: VarId| cut.terms.iter().find(|t| t.0 == v).map(|t| t.1).unwrap();
        assert!((coef(q) + 1.0).abs() < 1e-12);
        assert!((coef(w) + 1.0).abs() < 1e-12);
        assert!((cut.rhs + 2.0).abs() < 1e-12);
    }

    #[test]
    fn satisfied_cone_gives_no_cut() {
        let mut m = Model::new("t");
        let t = m.add_continuous("t", 0.0, 10.0);
        m.add_cone("k", vec![LinExpr::constant(0.0)], LinExpr::var(t));
        assert!(soc_linearization_cut(&m.cones[0], &[1.0], 1e-9).is_none());
        // apex: forced cut still valid at the point
        let cut = soc_gradient_cut(&m.cones[0], &[1.0]);
        assert!(cut.violation(&[1.0]) <= 1e-12);
    }

    #[test]
    fn mccormick_rows_pin_product_at_binary_points() {
        for &(xv, yv, yu) in &[(1.0, 1.5, 2.0), (0.0, 1.5, 2.0), (1.0, 0.0, 2.0), (1.0, 37.0, 50.0)] {
            let mut m = Model::new("mc");
            let x = m.add_binary("x");
            let y = m.add_continuous("y", 0.0, yu);
            let w = mccormick_product(&mut m, "w", x, y, yu).unwrap();
            // the feasible w interval given (x, y)
            let mut lo = m.var(w).lower;
            let mut hi = m.var(w).upper;
            for c in &m.linear {
                let cw = c.terms.iter().find(|t| t.0 == w).unwrap().1;
                let rest: f64 = c.terms.iter().filter(|t| t.0 != w).map(|t| t.1 * if t.0 == x { xv } else { yv }).sum();
                let bound = (c.rhs - rest) / cw;
                match (c.sense, cw > 0.0) {
                    (Sense::Le, true) | (Sense::Ge, false) => hi = hi.min(bound),
                    _ => lo = lo.max(bound),
                }
            }
            assert!((lo - xv * yv).abs() < 1e-12 && (hi - xv * yv).abs() < 1e-12, "x={xv} y={yv}: [{lo},{hi}]");
        }
    }

    #[test]
    fn mccormick_rejects_unbounded_factor() {
        let mut m = Model::new("mc");
        let x = m.add_binary("x");
        let y = m.add_continuous("lambda", 0.0, f64::INFINITY);
        let err = mccormick_product(&mut m, "w", x, y, f64::INFINITY).unwrap_err();
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn canonicalize_merges_and_drops() {
        let e = LinExpr::new().with(VarId(2), 1.0).with(VarId(0), 3.0).with(VarId(2), -1.0 + 1e-13);
        let c = e.canonicalize();
        assert_eq!(c.terms, vec![(VarId(0), 3.0)]);
    }

    #[test]
    fn validate_catches_undeclared_var() {
        let mut m = Model::new("bad");
        m.add_continuous("x", 0.0, 1.0);
        m.linear.push(LinearConstraint { name: "r".into(), terms: vec![(VarId(3), 1.0)], sense: Sense::Le, rhs: 0.0 });
        assert!(m.validate().is_err());
    }
}
