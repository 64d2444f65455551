//! Python bindings. Structured results cross the boundary as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use drcc_core::config::RunConfig;
use drcc_core::formulations::{build, ModelKind};
use drcc_core::harness;
use drcc_core::lp_format::to_lp_string;
use drcc_core::scenario::{sort_totals, ScenarioSet};
use drcc_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn config(toml: Option<&str>, kind: Option<&str>) -> PyResult<RunConfig> {
    let mut cfg = match toml {
        Some(text) => RunConfig::from_toml_str(text).map_err(py_err)?,
        None => RunConfig::default(),
    };
    if let Some(k) = kind {
        cfg.model.kind = k.parse::<ModelKind>().map_err(py_err)?;
    }
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml_string()
}

/// Solves the day sequentially; returns per-period records as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml=None, kind=None))]
fn solve_day(config_toml: Option<&str>, kind: Option<&str>) -> PyResult<String> {
    let cfg = config(config_toml, kind)?;
    let run = harness::run_sequential(&cfg, cfg.model.kind).map_err(py_err)?;
    json(&run.periods)
}

/// Solves one period from the initial temperatures; returns the solve result as JSON.
#[pyfunction]
#[pyo3(signature = (period, config_toml=None, kind=None))]
fn solve_period(period: usize, config_toml: Option<&str>, kind: Option<&str>) -> PyResult<String> {
    let cfg = config(config_toml, kind)?;
    let data = harness::prepare_day(&cfg).map_err(py_err)?;
    if period >= data.profile.n_periods() {
        return Err(PyValueError::new_err(format!("profile has {} periods", data.profile.n_periods())));
    }
    let kind = cfg.model.kind;
    let inst = harness::period_instance(&cfg, &data, kind, cfg.ambiguity_for(kind), period, data.x0.clone())
        .map_err(py_err)?;
    let opts = harness::period_options(&cfg, &data, period);
    let r = harness::solve_period(&cfg, &inst, kind, &opts, &cfg.solver).map_err(py_err)?;
    json(&r)
}

/// LP text of one period's model.
#[pyfunction]
#[pyo3(signature = (period, config_toml=None, kind=None))]
fn export_model(period: usize, config_toml: Option<&str>, kind: Option<&str>) -> PyResult<String> {
    let cfg = config(config_toml, kind)?;
    let data = harness::prepare_day(&cfg).map_err(py_err)?;
    if period >= data.profile.n_periods() {
        return Err(PyValueError::new_err(format!("profile has {} periods", data.profile.n_periods())));
    }
    let kind = cfg.model.kind;
    let inst = harness::period_instance(&cfg, &data, kind, cfg.ambiguity_for(kind), period, data.x0.clone())
        .map_err(py_err)?;
    let built = build(&inst, kind, &harness::period_options(&cfg, &data, period)).map_err(py_err)?;
    Ok(to_lp_string(&built.model))
}

#[pyfunction]
fn omega_coefficient(gamma1: f64, gamma2: f64, alpha: f64) -> f64 {
    drcc_core::formulations::omega_coefficient(gamma1, gamma2, alpha)
}

/// Sorted-sample left-hand side at `load` for PV totals `totals`.
#[pyfunction]
fn wasserstein_lhs(load: f64, totals: Vec<f64>, alpha: f64, capacity: f64) -> PyResult<f64> {
    let s = ScenarioSet::from_totals(0, &totals).map_err(py_err)?;
    Ok(drcc_core::verify::wasserstein_lhs(load, &sort_totals(&s, capacity), alpha))
}

#[pymodule]
fn drcc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(solve_day, m)?)?;
    m.add_function(wrap_pyfunction!(solve_period, m)?)?;
    m.add_function(wrap_pyfunction!(export_model, m)?)?;
    m.add_function(wrap_pyfunction!(omega_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_lhs, m)?)?;
    Ok(())
}
