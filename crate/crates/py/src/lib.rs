//! Python bindings: load catalog or JSON problems, run them, read off
//! certified indices and run the audit suite.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use fejer_core::moduli::estimate_modulus_from_oracles;
use fejer_core::problems::{catalog, ProblemConfig, ProblemInstance};
use fejer_core::verify::{run_full_audit, AuditParams, Fault};
use fejer_core::{Modulus, RateFn, Vector};

fn err(e: fejer_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(x: Vec<f64>) -> PyResult<Vector> {
    Vector::new(x).map_err(err)
}

#[pyclass(frozen, name = "Problem")]
struct PyProblem {
    inner: ProblemInstance,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ProblemConfig::from_json(text).and_then(|c| c.build()).map_err(err)?;
        Ok(PyProblem { inner })
    }

    #[staticmethod]
    fn from_catalog(name: &str) -> PyResult<Self> {
        let cfg = catalog()
            .into_iter()
            .find(|c| c.name == name)
            .ok_or_else(|| PyKeyError::new_err(name.to_owned()))?;
        Ok(PyProblem {
            inner: cfg.build().map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension
    }

    #[getter]
    fn reference_zero(&self) -> Vec<f64> {
        self.inner.reference_zero.coords().to_vec()
    }

    #[getter]
    fn bound(&self) -> f64 {
        self.inner.bound
    }

    fn residual(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.residual(&vector(x)?))
    }

    fn zero_distance(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.zero_distance(&vector(x)?))
    }

    /// Iterates x₀, …, x_steps.
    #[pyo3(signature = (steps=None))]
    fn run(&self, py: Python<'_>, steps: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
        let steps = steps.unwrap_or(self.inner.steps);
        let trace = py.detach(|| self.inner.run(steps)).map_err(err)?;
        Ok(trace.points().map(|p| p.coords().to_vec()).collect())
    }

    /// The instrumented trace as JSON.
    #[pyo3(signature = (steps=None))]
    fn trace_json(&self, py: Python<'_>, steps: Option<usize>) -> PyResult<String> {
        let steps = steps.unwrap_or(self.inner.steps);
        let trace = py.detach(|| self.inner.run(steps)).map_err(err)?;
        Ok(trace.to_json())
    }

    /// (α(ε), α(φ(ε)), α(φ(ε/2))).
    fn certify(&self, eps: f64) -> PyResult<(u64, u64, u64)> {
        let c = self.inner.certified_indices(eps).map_err(err)?;
        Ok((c.alpha, c.dist, c.cauchy))
    }

    fn termination_index(&self) -> PyResult<u64> {
        self.inner.termination_index().map_err(err)
    }

    fn modulus_json(&self) -> PyResult<String> {
        Ok(self.inner.modulus().map_err(err)?.to_json())
    }

    fn rate_json(&self) -> PyResult<String> {
        Ok(self.inner.rate().map_err(err)?.to_json())
    }

    #[pyo3(signature = (eps, samples=2000, seed=0))]
    fn estimate_modulus(&self, py: Python<'_>, eps: Vec<f64>, samples: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
        let (residual, zero_distance) = (self.inner.residual_fn(), self.inner.zero_distance_fn());
        let ball = self.inner.ball();
        py.detach(|| estimate_modulus_from_oracles(&*residual, &*zero_distance, &ball, &eps, samples, seed))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, dimension={})", self.inner.name, self.inner.dimension)
    }
}

#[pyfunction]
fn catalog_names() -> Vec<String> {
    catalog().into_iter().map(|c| c.name).collect()
}

#[pyfunction]
fn catalog_json(name: &str) -> PyResult<String> {
    catalog()
        .into_iter()
        .find(|c| c.name == name)
        .map(|c| c.to_json())
        .ok_or_else(|| PyKeyError::new_err(name.to_owned()))
}

#[pyfunction]
fn modulus_eval(modulus_json: &str, eps: f64) -> PyResult<f64> {
    Ok(Modulus::from_json(modulus_json).map_err(err)?.eval(eps))
}

#[pyfunction]
fn rate_eval(rate_json: &str, eps: f64) -> PyResult<u64> {
    Ok(RateFn::from_json(rate_json).map_err(err)?.eval(eps))
}

/// Full audit over the given problems (the catalog when None); returns the
/// JSON array of reports.
#[pyfunction]
#[pyo3(signature = (problems=None, eps=None, samples=2000, seed=0, eta=1e-9, fault=None))]
fn verify(
    py: Python<'_>,
    problems: Option<Vec<PyRef<'_, PyProblem>>>,
    eps: Option<Vec<f64>>,
    samples: usize,
    seed: u64,
    eta: f64,
    fault: Option<&str>,
) -> PyResult<String> {
    let fault = fault.map(str::parse::<Fault>).transpose().map_err(err)?;
    let instances: Vec<ProblemInstance> = match problems {
        Some(ps) => ps.iter().map(|p| p.inner.clone()).collect(),
        None => fejer_core::problems::catalog_instances().map_err(err)?,
    };
    let mut params = AuditParams {
        samples,
        seed,
        eta,
        ..AuditParams::default()
    };
    if let Some(e) = eps {
        params.eps_grid = e;
    }
    let reports = py.detach(|| run_full_audit(&instances, &params, fault));
    serde_json::to_string(&reports).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn fejer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_json, m)?)?;
    m.add_function(wrap_pyfunction!(modulus_eval, m)?)?;
    m.add_function(wrap_pyfunction!(rate_eval, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
