//! Python bindings: densities, quantile maps from either backend, contours,
//! the K estimate and the diagnostics suite. Structured results come back as
//! plain Python objects (dicts and lists).

use centerward::diagnostics::{run_suite, DiagnosticsConfig, TargetLaw};
use centerward::measures::{builtin_density, radial_quantile_oracle};
use centerward::quantile::{
    estimate_k, extract_contour, nestedness_check, Contour, EntropicParams, QuantileMap,
    SemidiscreteParams,
};
use centerward::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Convergence { .. } | Error::State(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_json(raw: Option<&str>) -> PyResult<serde_json::Value> {
    match raw {
        None => Ok(serde_json::json!({})),
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// Converts through JSON so results arrive as dicts and lists.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A built-in target density, e.g. `Density("gaussian-mixture")`.
#[pyclass(name = "Density", frozen)]
pub struct PyDensity {
    inner: centerward::measures::Density,
}

#[pymethods]
impl PyDensity {
    /// `params` is a JSON object string with family parameters.
    #[new]
    #[pyo3(signature = (family, params=None))]
    fn new(family: &str, params: Option<&str>) -> PyResult<Self> {
        let inner = builtin_density(family, &parse_json(params)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn pdf(&self, y: Vec<f64>) -> PyResult<f64> {
        if y.len() != self.inner.dim() {
            return Err(PyValueError::new_err("point has the wrong dimension"));
        }
        Ok(self.inner.eval(&y))
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.inner.sample(n, seed)
    }

    /// Radius of the closed-form radial quantile map at order `r`; radial
    /// densities only.
    fn radial_quantile(&self, r: f64) -> PyResult<f64> {
        let profile = self
            .inner
            .radial_profile()
            .ok_or_else(|| PyValueError::new_err("oracle requires radial density"))?;
        radial_quantile_oracle(&profile, r).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Density({:?}, dim={})", self.inner.name(), self.inner.dim())
    }
}

/// Center-outward quantile map `Q` (and, for the entropic backend, its
/// inverse `F`).
#[pyclass(name = "QuantileMap", frozen)]
pub struct PyQuantileMap {
    inner: QuantileMap,
}

#[pymethods]
impl PyQuantileMap {
    /// Entropic solve; `params` is a JSON object with the entropic settings
    /// (`n_r`, `n_ang`, `epsilons`, `tol`, `max_iter`, `debias`, `target`).
    #[staticmethod]
    #[pyo3(signature = (density, params=None, seed=0))]
    fn entropic(
        py: Python<'_>,
        density: &PyDensity,
        params: Option<&str>,
        seed: u64,
    ) -> PyResult<Self> {
        let p: EntropicParams = serde_json::from_value(parse_json(params)?)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let d = &density.inner;
        let inner = py
            .detach(|| QuantileMap::solve_entropic(d, &p, seed))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Semidiscrete solve on `atoms` points sampled from the density (d = 2).
    #[staticmethod]
    #[pyo3(signature = (density, atoms=512, seed=0))]
    fn semidiscrete(
        py: Python<'_>,
        density: &PyDensity,
        atoms: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let p = SemidiscreteParams {
            atoms,
            ..Default::default()
        };
        let d = &density.inner;
        let inner = py
            .detach(|| QuantileMap::solve_semidiscrete(d, &p, seed))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn backend(&self) -> &'static str {
        match self.inner.backend() {
            centerward::quantile::Backend::Semidiscrete => "semidiscrete",
            centerward::quantile::Backend::Entropic => "entropic",
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn metadata<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.inner.metadata)
    }

    /// `Q(x)` for `0 < |x| < 1`.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x).map_err(to_py)
    }

    /// `F(y)`; entropic backend only.
    fn inverse(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.inverse(&y).map_err(to_py)
    }

    /// Vertices of `Q(r S^1)`.
    #[pyo3(signature = (r, m=256))]
    fn contour(&self, r: f64, m: usize) -> PyResult<Vec<[f64; 2]>> {
        Ok(extract_contour(&self.inner, r, m).map_err(to_py)?.vertices)
    }

    /// Nestedness report for contours at `radii`.
    #[pyo3(signature = (radii, m=256, slack=0.0))]
    fn nestedness<'py>(
        &self,
        py: Python<'py>,
        radii: Vec<f64>,
        m: usize,
        slack: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let contours = radii
            .iter()
            .map(|&r| extract_contour(&self.inner, r, m))
            .collect::<centerward::Result<Vec<Contour>>>()
            .map_err(to_py)?;
        to_object(py, &nestedness_check(&contours, slack))
    }

    /// Contour diameters along strictly decreasing radii.
    #[pyo3(signature = (radii, m=256))]
    fn estimate_k<'py>(
        &self,
        py: Python<'py>,
        radii: Vec<f64>,
        m: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &estimate_k(&self.inner, &radii, m).map_err(to_py)?)
    }

    /// Runs the diagnostics suite against `density`; returns the report.
    #[pyo3(signature = (density, seed=0))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        density: &PyDensity,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let report = run_suite(
            &self.inner,
            TargetLaw::Density(&density.inner),
            &DiagnosticsConfig::default(),
            seed,
            None,
        );
        to_object(py, &report)
    }

    /// Copy with dual potentials perturbed by uniform noise of `magnitude`.
    fn corrupted(&self, magnitude: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.corrupted(magnitude, seed).map_err(to_py)?,
        })
    }
}

#[pymodule]
pub fn centerward_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add_class::<PyQuantileMap>()?;
    m.add("__version__", centerward::VERSION)?;
    Ok(())
}
