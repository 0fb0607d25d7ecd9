//! Python bindings for the `dilute-clt` core crate.
//!
//! Built as the `dilute_clt` extension module. Reports come back as JSON
//! strings so they stay identical to what the command line writes.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dilute_clt::config::RunConfig;
use dilute_clt::ensemble::entry_moments as core_entry_moments;
use dilute_clt::harness::run_experiment_with_workers;
use dilute_clt::theory::{self, DEFAULT_DEGENERACY_THRESHOLD};
use dilute_clt::{ComplexPoint, EnsembleKind, Error, QuadratureRule, Spectrum, SymmetricMatrix};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Parameter(_) | Error::Config(_) | Error::Data(_) | Error::Range(_) => {
            PyValueError::new_err(err.to_string())
        }
        Error::Replica { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyArithmeticError::new_err(err.to_string()),
    }
}

fn point(z: Complex64) -> PyResult<ComplexPoint> {
    ComplexPoint::new(z.re, z.im).map_err(to_py)
}

fn parse_kind(kind: &str) -> PyResult<EnsembleKind> {
    match kind {
        "diluted-graph" => Ok(EnsembleKind::DilutedGraph),
        "wigner-comparison" => Ok(EnsembleKind::WignerComparison),
        other => Err(PyValueError::new_err(format!("unknown ensemble kind {other:?}"))),
    }
}

fn kind_name(kind: EnsembleKind) -> &'static str {
    match kind {
        EnsembleKind::DilutedGraph => "diluted-graph",
        EnsembleKind::WignerComparison => "wigner-comparison",
    }
}

/// Ensemble parameters `(n, p, kind, seed)`.
#[pyclass(name = "EnsembleParams", frozen)]
struct PyEnsembleParams {
    inner: dilute_clt::EnsembleParams,
}

#[pymethods]
impl PyEnsembleParams {
    #[new]
    #[pyo3(signature = (n, p, kind = "diluted-graph", seed = 0))]
    fn new(n: usize, p: f64, kind: &str, seed: u64) -> PyResult<Self> {
        let inner = dilute_clt::EnsembleParams::new(n, p, parse_kind(kind)?, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn kind(&self) -> &'static str {
        kind_name(self.inner.kind)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn edge_probability(&self) -> f64 {
        self.inner.edge_probability()
    }

    /// Closed-form entry moments `(mean, variance, kappa4, w2)`.
    fn entry_moments(&self) -> PyResult<(f64, f64, f64, f64)> {
        let m = core_entry_moments(&self.inner).map_err(to_py)?;
        Ok((m.mean, m.variance, m.kappa4, m.w2))
    }

    fn __repr__(&self) -> String {
        format!(
            "EnsembleParams(n={}, p={}, kind={:?}, seed={})",
            self.inner.n,
            self.inner.p,
            kind_name(self.inner.kind),
            self.inner.seed
        )
    }
}

/// A test function parsed from its spec string, e.g. `"monomial:2"` or
/// `"cosh:1(gaussian:0,1)"`.
#[pyclass(name = "TestFunction", frozen)]
struct PyTestFunction {
    inner: dilute_clt::TestFunction,
}

#[pymethods]
impl PyTestFunction {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let inner = spec.parse().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn evaluate(&self, x: f64) -> PyResult<f64> {
        self.inner.evaluate(x).map_err(to_py)
    }

    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.evaluate(x)
    }

    fn derivative(&self, x: f64) -> PyResult<f64> {
        self.inner.derivative(x).map_err(to_py)
    }

    /// `(1/2π) ∫ e^{ikx} φ(x) dx`.
    fn fourier_transform(&self, k: f64) -> PyResult<Complex64> {
        self.inner.fourier_transform(k).map_err(to_py)
    }

    fn sobolev_norm(&self, s: f64) -> PyResult<f64> {
        self.inner.sobolev_norm(s).map(|n| n.value).map_err(to_py)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("TestFunction({:?})", self.inner.to_string())
    }
}

/// Sample replica `replica` of the ensemble as a list of rows.
#[pyfunction]
fn sample(params: PyRef<'_, PyEnsembleParams>, replica: u64) -> PyResult<Vec<Vec<f64>>> {
    dilute_clt::sample(&params.inner, replica)
        .map(|m| m.to_rows())
        .map_err(to_py)
}

/// Ascending eigenvalues of a symmetric matrix given as rows.
#[pyfunction]
#[pyo3(signature = (rows, tol = 1e-12))]
fn eigenvalues(rows: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<f64>> {
    let m = SymmetricMatrix::from_rows(&rows).map_err(to_py)?;
    dilute_clt::eigenvalues(&m, tol)
        .map(|s| s.values().to_vec())
        .map_err(to_py)
}

#[pyfunction]
fn linear_statistic(spectrum: Vec<f64>, phi: PyRef<'_, PyTestFunction>) -> PyResult<f64> {
    let s = Spectrum::from_values(spectrum).map_err(to_py)?;
    dilute_clt::linear_statistic(&s, &phi.inner).map_err(to_py)
}

/// `Σ 1/(λ_i − z)`.
#[pyfunction]
fn resolvent_trace(spectrum: Vec<f64>, z: Complex64) -> PyResult<Complex64> {
    let s = Spectrum::from_values(spectrum).map_err(to_py)?;
    Ok(dilute_clt::resolvent_trace(&s, point(z)?))
}

/// Limiting variance of the rescaled centered statistic. Returns
/// `(variance, condition_integral, degenerate)`. With `order=None` the
/// quadrature order doubles until the integral settles.
#[pyfunction]
#[pyo3(signature = (phi, order = None, threshold = DEFAULT_DEGENERACY_THRESHOLD))]
fn clt_variance(
    phi: PyRef<'_, PyTestFunction>,
    order: Option<usize>,
    threshold: f64,
) -> PyResult<(f64, f64, bool)> {
    let r = match order {
        Some(order) => {
            let rule = QuadratureRule::new(order).map_err(to_py)?;
            dilute_clt::clt_variance(&phi.inner, &rule, threshold)
        }
        None => theory::clt_variance_auto(&phi.inner, threshold),
    }
    .map_err(to_py)?;
    Ok((r.variance, r.condition_integral, r.degenerate))
}

/// Limiting variance of the unrescaled statistic for a Wigner matrix.
#[pyfunction]
#[pyo3(signature = (phi, kappa4, w2 = 0.0, order = theory::DEFAULT_ORDER))]
fn wigner_variance(
    phi: PyRef<'_, PyTestFunction>,
    kappa4: f64,
    w2: f64,
    order: usize,
) -> PyResult<f64> {
    let rule = QuadratureRule::new(order).map_err(to_py)?;
    theory::wigner_variance(&phi.inner, kappa4, w2, &rule).map_err(to_py)
}

/// Limiting covariance of the rescaled resolvent traces at `z1` and `z2`.
#[pyfunction]
fn covariance_kernel(z1: Complex64, z2: Complex64) -> PyResult<Complex64> {
    dilute_clt::covariance_kernel(z1, z2).map_err(to_py)
}

/// Stieltjes transform of the semicircle law.
#[pyfunction]
fn stieltjes_f(z: Complex64) -> PyResult<Complex64> {
    Ok(theory::stieltjes_f(point(z)?))
}

#[pyfunction]
fn semicircle_density(x: f64) -> f64 {
    theory::semicircle_density(x)
}

/// Run the experiment described by a TOML config and return the report
/// as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml, workers = 1))]
fn run_experiment(py: Python<'_>, config_toml: &str, workers: usize) -> PyResult<String> {
    let cfg = RunConfig::from_toml_str(config_toml)
        .and_then(|c| c.experiment())
        .map_err(to_py)?;
    let report = py
        .detach(|| run_experiment_with_workers(&cfg, workers.max(1)))
        .map_err(to_py)?;
    dilute_clt::report::to_json_string(&report).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "dilute_clt")]
fn dilute_clt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyEnsembleParams>()?;
    m.add_class::<PyTestFunction>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(linear_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_trace, m)?)?;
    m.add_function(wrap_pyfunction!(clt_variance, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_variance, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(stieltjes_f, m)?)?;
    m.add_function(wrap_pyfunction!(semicircle_density, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
