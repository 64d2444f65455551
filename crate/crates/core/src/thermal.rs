//! RC building model, its zero-order-hold discretization, and the
//! discrete-time temperature recursion `x_t = A x_{t-1} + B u_t + G v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Given,
    Discretized,
}

/// Discrete-time parameters of one building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingParams {
    pub a: f64,
    /// Temperature change per ON period (negative for cooling).
    pub b: f64,
    pub g: Vec<f64>,
    pub v: Vec<f64>,
    /// Power draw in kW when ON.
    pub power_kw: f64,
    pub provenance: Provenance,
}

impl BuildingParams {
    pub fn given(a: f64, b: f64, g: Vec<f64>, v: Vec<f64>, power_kw: f64) -> Result<Self> {
        let p = BuildingParams { a, b, g, v, power_kw, provenance: Provenance::Given };
        p.validate()?;
        Ok(p)
    }

    /// The constant disturbance contribution `G v`.
    pub fn disturbance(&self) -> f64 {
        self.g.iter().zip(&self.v).map(|(g, v)| g * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidInput(format!("state coefficient A = {} must lie in (0, 1)", self.a)));
        }
        if !(self.power_kw > 0.0) {
            return Err(Error::InvalidInput(format!("power draw {} kW must be positive", self.power_kw)));
        }
        if self.g.len() != self.v.len() {
            return Err(Error::InvalidInput(format!(
                "disturbance gain has {} entries but disturbance vector has {}",
                self.g.len(),
                self.v.len()
            )));
        }
        Ok(())
    }
}

/// Continuous-time RC parameters. `r` in K/kW, `c` in kJ/K, so `r * c` is in
/// seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRc {
    pub r: f64,
    pub c: f64,
    pub q_hvac: f64,
    pub t_out: f64,
    pub q_out: f64,
}

/// Zero-order-hold discretization of `dT/dt = a T + b u + g . (T_out, Q_out)`
/// with `a = -1/(RC)`, `b = -Q_hvac/C`, `g = (1/(RC), 1/C)`.
pub fn discretize_rc(rc: &ContinuousRc, dt: f64, power_kw: f64) -> Result<BuildingParams> {
    if !(rc.r > 0.0) || !(rc.c > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "R, C and the sampling interval must be positive (R={}, C={}, dt={dt})",
            rc.r, rc.c
        )));
    }
    let tau = rc.r * rc.c;
    let a_c = -1.0 / tau;
    let a = (a_c * dt).exp();
    // (A - 1)/a, written to stay accurate for small dt
    let phi = -tau * (a_c * dt).exp_m1();
    let p = BuildingParams {
        a,
        b: phi * (-rc.q_hvac / rc.c),
        g: vec![phi / tau, phi / rc.c],
        v: vec![rc.t_out, rc.q_out],
        power_kw,
        provenance: Provenance::Discretized,
    };
    p.validate()?;
    Ok(p)
}

pub fn step_temperature(params: &BuildingParams, x_prev: f64, u: u8) -> f64 {
    params.a * x_prev + params.b * f64::from(u) + params.disturbance()
}

pub fn comfort_deviation(x: f64, x_ref: f64) -> f64 {
    (x - x_ref).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetModel {
    pub buildings: Vec<BuildingParams>,
    pub x_ref: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub c_sys: f64,
    pub c_switch: f64,
    pub c_pv: f64,
    /// Sampling interval in seconds.
    pub dt: f64,
}

impl FleetModel {
    pub fn homogeneous(n: usize, building: BuildingParams) -> Self {
        FleetModel {
            buildings: vec![building; n],
            x_ref: 23.0,
            x_min: 21.5,
            x_max: 24.5,
            c_sys: 1.0,
            c_switch: 1.0,
            c_pv: 1.0,
            dt: 600.0,
        }
    }

    pub fn len(&self) -> usize {
        self.buildings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buildings.is_empty()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.buildings.iter().map(|b| b.power_kw).collect()
    }

    /// Fleet load with every unit ON.
    pub fn max_load(&self) -> f64 {
        self.buildings.iter().map(|b| b.power_kw).sum()
    }

    pub fn load(&self, u: &[u8]) -> f64 {
        self.buildings.iter().zip(u).map(|(b, &ui)| b.power_kw * f64::from(ui)).sum()
    }

    pub fn step(&self, x_prev: &[f64], u: &[u8]) -> Vec<f64> {
        self.buildings.iter().zip(x_prev).zip(u).map(|((b, &x), &ui)| step_temperature(b, x, ui)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.buildings.is_empty() {
            return Err(Error::InvalidInput("fleet has no buildings".into()));
        }
        for b in &self.buildings {
            b.validate()?;
        }
        if !(self.x_min < self.x_ref && self.x_ref < self.x_max) {
            return Err(Error::InvalidInput(format!(
                "comfort band must satisfy x_min < x_ref < x_max (got {} < {} < {})",
                self.x_min, self.x_ref, self.x_max
            )));
        }
        if self.c_sys < 0.0 || self.c_switch < 0.0 || self.c_pv < 0.0 {
            return Err(Error::InvalidInput("cost weights must be nonnegative".into()));
        }
        Ok(())
    }
}
