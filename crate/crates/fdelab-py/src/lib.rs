//! Python bindings: exponent arithmetic, the scaled nonlinearities and
//! config-driven task runs. Structured results come back as plain dicts
//! and lists (the JSON report schema of the CLI).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::fdelab::cli::{self, RunConfig, SweepAxis};
use ::fdelab::exponents::{self, BetaPolicy, QCorollary};
use ::fdelab::nonlinearity::{self, NonlinearitySpec};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// serde value -> Python object through the json module.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Python object (dict or JSON string) -> serde value.
fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(value_error)
}

/// (p_c, p_0) for synthetic dimension m.
#[pyfunction]
fn critical_exponents(m: f64) -> PyResult<(f64, f64)> {
    exponents::critical_exponents(m).map_err(value_error)
}

/// Exponent data at (p, m); `beta` picks an explicit β instead of the
/// midpoint of the admissible window.
#[pyfunction]
#[pyo3(signature = (p, m, beta=None))]
fn exponent_summary<'py>(py: Python<'py>, p: f64, m: f64, beta: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let policy = beta.map_or(BetaPolicy::Midpoint, |beta| BetaPolicy::Explicit { beta });
    let data = exponents::exponent_summary(p, m, policy).map_err(value_error)?;
    to_py(py, &data)
}

#[pyfunction]
#[pyo3(signature = (p, m, s, corollary="Cor6_4"))]
fn q_admissible<'py>(py: Python<'py>, p: f64, m: f64, s: f64, corollary: &str) -> PyResult<Bound<'py, PyAny>> {
    let which = match corollary {
        "Cor6_4" => QCorollary::Cor6_4,
        "Cor6_5" => QCorollary::Cor6_5,
        other => return Err(value_error(format!("unknown corollary `{other}`"))),
    };
    to_py(py, &exponents::q_admissible(p, m, s, which).map_err(value_error)?)
}

/// Regime-I scaled nonlinearity (value, d/dv, d/dx).
#[pyfunction]
fn sigma_i(spec: &Bound<'_, PyAny>, p: f64, t: f64, x: f64, v: f64) -> PyResult<(f64, f64, f64)> {
    let spec: NonlinearitySpec = from_py(spec)?;
    let s = nonlinearity::sigma_I(&spec, p, t, x, v).map_err(value_error)?;
    Ok((s.value, s.d_v, s.d_x))
}

/// Regime-II scaled nonlinearity (value, d/dv, d/dx).
#[pyfunction]
fn sigma_ii(spec: &Bound<'_, PyAny>, p: f64, t: f64, x: f64, v: f64) -> PyResult<(f64, f64, f64)> {
    let spec: NonlinearitySpec = from_py(spec)?;
    let s = nonlinearity::sigma_II(&spec, p, t, x, v).map_err(value_error)?;
    Ok((s.value, s.d_v, s.d_x))
}

/// A validated run config (TOML or JSON text, or a JSON report).
#[pyclass(frozen)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = cli::parse_config(text).map_err(value_error)?;
        inner.validate().map_err(value_error)?;
        Ok(Config { inner })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let inner = cli::load_config(&path).map_err(value_error)?;
        inner.validate().map_err(value_error)?;
        Ok(Config { inner })
    }

    /// Task labels in run order.
    #[getter]
    fn tasks(&self) -> Vec<String> {
        self.inner.tasks.iter().map(|t| t.label()).collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// Run every task; one report dict per task.
    fn run<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let cfg = self.inner.clone();
        let outcomes = py.detach(move || cli::run_tasks(&cfg));
        outcomes.iter().map(|o| to_py(py, &o.report)).collect()
    }

    /// Reports as the exact JSON text the CLI writes.
    fn run_json(&self, py: Python<'_>) -> Vec<String> {
        let cfg = self.inner.clone();
        py.detach(move || cli::run_tasks(&cfg).iter().map(|o| o.report.to_json()).collect())
    }

    /// Sweep one axis; returns the CSV table.
    fn sweep(&self, py: Python<'_>, axis: &str, values: Vec<f64>) -> PyResult<String> {
        let axis: SweepAxis = axis.parse().map_err(value_error)?;
        let cfg = self.inner.clone();
        Ok(py.detach(move || cli::sweep(&cfg, axis, &values).to_csv(axis)))
    }

    fn __repr__(&self) -> String {
        format!("Config(p={}, m={}, tasks={:?})", self.inner.exponents.p, self.inner.exponents.m, self.tasks())
    }
}

#[pymodule]
fn fdelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(critical_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_summary, m)?)?;
    m.add_function(wrap_pyfunction!(q_admissible, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_i, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_ii, m)?)?;
    m.add_class::<Config>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
