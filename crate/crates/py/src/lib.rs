//! Python bindings: the experiment harness (JSON in, JSON or CSV out) and a
//! few direct entry points to the solvers.

use maxent_bayes::harness::{self, ExperimentConfig};
use maxent_bayes::maxent::{self, ConstraintSpec};
use maxent_bayes::measures::{self, FiniteDistribution, Potential};
use maxent_bayes::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(maxent_bayes_py, MaxentBayesError, PyException, "Raised with `<Code>: <message>`.");

fn py_err(e: Error) -> PyErr {
    MaxentBayesError::new_err(format!("{}: {e}", e.code()))
}

fn execute(config_json: &str) -> PyResult<harness::Outcome> {
    let config = ExperimentConfig::parse(config_json, None).map_err(py_err)?;
    harness::execute(&config).map_err(py_err)
}

/// Runs an experiment config and returns its JSON result.
#[pyfunction]
fn run(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let outcome = py.detach(|| execute(config_json))?;
    String::from_utf8(outcome.json).map_err(|e| py_err(Error::Io(e.to_string())))
}

/// Runs an experiment config and returns its CSV table.
#[pyfunction]
fn run_csv(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let outcome = py.detach(|| execute(config_json))?;
    String::from_utf8(outcome.csv).map_err(|e| py_err(Error::Io(e.to_string())))
}

/// Diagnostics for a config as a JSON list; `"[]"` means valid.
#[pyfunction]
fn validate(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let diagnostics = py.detach(|| match ExperimentConfig::parse(config_json, None) {
        Ok(config) => harness::validate(&config),
        Err(e) => vec![harness::Diagnostic::from(&e)],
    });
    serde_json::to_string(&diagnostics).map_err(|e| py_err(Error::Io(e.to_string())))
}

/// `(lambda, weights)` of the tilt `q e^{-lambda V}` with mean `target`.
#[pyfunction]
#[pyo3(signature = (q, potential, target, tol = maxent::DEFAULT_TILT_TOL))]
fn solve_tilt(q: Vec<f64>, potential: Vec<f64>, target: f64, tol: f64) -> PyResult<(f64, Vec<f64>)> {
    let q = FiniteDistribution::from_weights(q).map_err(py_err)?;
    let v = Potential::new(potential).map_err(py_err)?;
    let t = maxent::solve_tilt(&q, &v, target, tol).map_err(py_err)?;
    Ok((t.lambda(), t.realized().weights().to_vec()))
}

/// `(lambda, weights, rate)` of the I-projection onto `V·mu = target`.
#[pyfunction]
fn i_projection(p: Vec<f64>, potential: Vec<f64>, target: f64) -> PyResult<(f64, Vec<f64>, f64)> {
    let p = FiniteDistribution::from_weights(p).map_err(py_err)?;
    let c = ConstraintSpec::point(Potential::new(potential).map_err(py_err)?, target).map_err(py_err)?;
    let proj = maxent::i_projection(&p, &c).map_err(py_err)?;
    Ok((proj.tilt.lambda(), proj.tilt.realized().weights().to_vec(), proj.rate))
}

/// `D(p ‖ q)` in nats.
#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let p = FiniteDistribution::from_weights(p).map_err(py_err)?;
    let q = FiniteDistribution::from_weights(q).map_err(py_err)?;
    measures::kl_divergence(&p, &q).map_err(py_err)
}

#[pymodule]
fn maxent_bayes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MaxentBayesError", m.py().get_type::<MaxentBayesError>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tilt, m)?)?;
    m.add_function(wrap_pyfunction!(i_projection, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    Ok(())
}
