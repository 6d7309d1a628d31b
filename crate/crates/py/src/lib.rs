//! Python bindings: coefficients, the expansion density, fBm simulation,
//! estimation and the Monte Carlo report.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use hurst_core::coefficients::global_cache;
use hurst_core::estimator::{estimate_h, estimate_h_all};
use hurst_core::expansion::Variant;
use hurst_core::fbm::generate_path;
use hurst_core::kernels::KernelEvaluator;
use hurst_core::montecarlo::{run_mc, Estimator};
use hurst_core::{
    CorrectionTable, EdgeworthModel, EstimateResult, ExpansionCoefficients, HurstError, HurstModel, McConfig,
    Method, Truncation,
};

create_exception!(hurst, ToleranceNotAchieved, PyRuntimeError, "A series did not converge within the radius cap.");

fn err(e: HurstError) -> PyErr {
    match e {
        HurstError::ToleranceNotAchieved { .. } => ToleranceNotAchieved::new_err(e.to_string()),
        HurstError::Io(_) => PyOSError::new_err(e.to_string()),
        HurstError::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(x) => match (x.as_i64(), x.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => x.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_dict<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Limit constants of the expansion at one Hurst index.
#[pyclass(name = "Coefficients", module = "hurst", frozen)]
struct PyCoefficients(ExpansionCoefficients);

#[pymethods]
impl PyCoefficients {
    #[new]
    #[pyo3(signature = (h, tol = 1e-10))]
    fn new(py: Python<'_>, h: f64, tol: f64) -> PyResult<Self> {
        let c = py.detach(|| global_cache().get(h, &Truncation::with_tol(tol))).map_err(err)?;
        Ok(Self(c.as_ref().clone()))
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }
    #[getter]
    fn sigma11(&self) -> f64 {
        self.0.sigma11
    }
    #[getter]
    fn sigma12(&self) -> f64 {
        self.0.sigma12
    }
    #[getter]
    fn sigma22(&self) -> f64 {
        self.0.sigma22
    }
    #[getter]
    fn g_inf(&self) -> f64 {
        self.0.g_inf
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }
    #[getter]
    fn u_mat(&self) -> [[f64; 3]; 3] {
        self.0.u_mat
    }
    #[getter]
    fn t_mat(&self) -> [[f64; 2]; 2] {
        self.0.t_mat
    }
    #[getter]
    fn radius(&self) -> usize {
        self.0.radius
    }

    /// All fields, with the `κ` limits keyed by their index patterns.
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Coefficients(H={}, sigma11={}, g_inf={}, theta={}, tau={})",
            self.0.h, self.0.sigma11, self.0.g_inf, self.0.theta, self.0.tau
        )
    }
}

/// The expansion `p_n(z) = (1 + q(z)/√n) φ(z; 0, v)` of the law of `√n(Ĥ − H)`.
#[pyclass(name = "Expansion", module = "hurst", frozen)]
struct PyExpansion(EdgeworthModel);

fn variant(b: Option<f64>) -> Variant {
    b.map_or(Variant::Plain, Variant::Modified)
}

#[pymethods]
impl PyExpansion {
    #[new]
    #[pyo3(signature = (h, tol = 1e-10))]
    fn new(py: Python<'_>, h: f64, tol: f64) -> PyResult<Self> {
        let c = py.detach(|| global_cache().get(h, &Truncation::with_tol(tol))).map_err(err)?;
        Ok(Self(EdgeworthModel::from_coefficients(&c)))
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }
    #[getter]
    fn v(&self) -> f64 {
        self.0.v
    }
    #[getter]
    fn a3(&self) -> f64 {
        self.0.a3
    }
    #[getter]
    fn a1(&self) -> f64 {
        self.0.a1
    }
    #[getter]
    fn b_star(&self) -> f64 {
        self.0.b_star
    }
    #[getter]
    fn b_star_star(&self) -> f64 {
        self.0.b_star_star
    }

    fn q(&self, z: f64) -> f64 {
        self.0.q(z)
    }

    fn phi(&self, z: f64) -> f64 {
        self.0.phi(z)
    }

    /// Density at `z`; with `b`, the density of the bias-modified estimator.
    #[pyo3(signature = (n, z, b = None))]
    fn density(&self, n: u64, z: f64, b: Option<f64>) -> PyResult<f64> {
        self.0.density(n, z, variant(b)).map_err(err)
    }

    #[pyo3(signature = (n, z, b = None))]
    fn cdf(&self, n: u64, z: f64, b: Option<f64>) -> PyResult<f64> {
        self.0.cdf_pn(n, z, variant(b)).map_err(err)
    }

    #[pyo3(signature = (n, b = None))]
    fn predicted_moments<'py>(&self, py: Python<'py>, n: u64, b: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0.predicted_moments_variant(n, variant(b)).map_err(err)?)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Expansion(H={}, v={}, a3={}, a1={}, b_star={}, b_star_star={})",
            self.0.h, self.0.v, self.0.a3, self.0.a1, self.0.b_star, self.0.b_star_star
        )
    }
}

#[pyclass(name = "Estimate", module = "hurst", frozen, get_all)]
struct PyEstimate {
    n: usize,
    v_n: f64,
    v_2n: f64,
    h_raw: f64,
    h_hat: f64,
    h_star: Option<f64>,
    h_med: Option<f64>,
    clamped: bool,
}

impl From<EstimateResult> for PyEstimate {
    fn from(r: EstimateResult) -> Self {
        Self {
            n: r.n,
            v_n: r.v_n,
            v_2n: r.v_2n,
            h_raw: r.h_raw,
            h_hat: r.h_hat,
            h_star: r.h_b,
            h_med: r.h_med,
            clamped: r.clamped,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("None".to_string(), |v| v.to_string());
        let clamped = if self.clamped { "True" } else { "False" };
        format!(
            "Estimate(n={}, h_hat={}, h_star={}, h_med={}, clamped={clamped})",
            self.n,
            self.h_hat,
            opt(self.h_star),
            opt(self.h_med)
        )
    }
}

/// `B` on the fine grid `jT/(2n)`, `j = 0..=2n`.
#[pyfunction]
#[pyo3(signature = (h, n, t = 1.0, seed = 0, method = "auto"))]
fn simulate(py: Python<'_>, h: f64, n: usize, t: f64, seed: u64, method: &str) -> PyResult<Vec<f64>> {
    let method: Method = method.parse().map_err(err)?;
    let model = HurstModel::new(h, t, n).map_err(err)?;
    py.detach(|| generate_path(model, seed, method)).map(|p| p.values).map_err(err)
}

/// Estimate from `2n+1` samples; `corrected` adds the `b*` and `b**` variants.
#[pyfunction]
#[pyo3(signature = (samples, corrected = true))]
fn estimate(py: Python<'_>, samples: Vec<f64>, corrected: bool) -> PyResult<PyEstimate> {
    py.detach(|| {
        if corrected {
            estimate_h_all(&samples, CorrectionTable::shared()?)
        } else {
            estimate_h(&samples)
        }
    })
    .map(PyEstimate::from)
    .map_err(err)
}

/// Monte Carlo report as a dict.
#[pyfunction]
#[pyo3(signature = (h, n, reps = 10_000, seed = 0, t = 1.0, bins = None, z_range = None, variants = None, method = "auto", tol = 1e-10))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo<'py>(
    py: Python<'py>,
    h: f64,
    n: usize,
    reps: usize,
    seed: u64,
    t: f64,
    bins: Option<usize>,
    z_range: Option<f64>,
    variants: Option<Vec<String>>,
    method: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let defaults = McConfig::default();
    let variants = match variants {
        Some(v) => v.iter().map(|x| x.parse()).collect::<Result<Vec<Estimator>, _>>().map_err(err)?,
        None => defaults.variants.clone(),
    };
    let config = McConfig {
        h,
        t,
        n,
        reps,
        seed,
        bins: bins.unwrap_or(defaults.bins),
        z_range,
        variants,
        method: method.parse().map_err(err)?,
        tol,
        ..defaults
    };
    let report = py.detach(|| run_mc(&config)).map_err(err)?;
    to_dict(py, &report)
}

#[pyfunction]
fn rho_hat(h: f64, j: i64) -> PyResult<f64> {
    Ok(KernelEvaluator::new(h).map_err(err)?.rho_hat(j))
}

#[pyfunction]
fn rho_tilde(h: f64, j: i64) -> PyResult<f64> {
    Ok(KernelEvaluator::new(h).map_err(err)?.rho_tilde(j))
}

#[pymodule]
fn hurst(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyExpansion>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(rho_hat, m)?)?;
    m.add_function(wrap_pyfunction!(rho_tilde, m)?)?;
    m.add("ToleranceNotAchieved", m.py().get_type::<ToleranceNotAchieved>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
