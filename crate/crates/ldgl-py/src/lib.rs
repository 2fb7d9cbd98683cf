//! Python bindings. Structured results (energy breakdowns, reports, traces)
//! cross the boundary as JSON and come back as `dict`s.

use std::path::Path;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ldgl::analysis::{self, KappaDirection};
use ldgl::construction::{self, ConstructionOptions};
use ldgl::experiment::{self, ExperimentConfig};
use ldgl::minimize::{self, CheckTarget, MinimizeOptions};
use ldgl::{energy, io};
use ldgl::{ContinuumConfiguration, LayerStack, LayeredConfiguration, Mesh, ModelParams, Potential3D};

fn err(e: ldgl::Error) -> PyErr {
    match e {
        ldgl::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, d: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    match d {
        None => Ok(T::default()),
        Some(d) => {
            let s: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
        }
    }
}

/// Physical and grid parameters.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (epsilon, n_layers, h_ex, n_x, n_y, n_z, height=1.0, omega=(1.0, 1.0), lam=1.0, pad=1.5, cutoff_d=1.0, grading=1.25))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epsilon: f64,
        n_layers: usize,
        h_ex: f64,
        n_x: usize,
        n_y: usize,
        n_z: usize,
        height: f64,
        omega: (f64, f64),
        lam: f64,
        pad: f64,
        cutoff_d: f64,
        grading: f64,
    ) -> PyResult<Self> {
        let mut mesh = Mesh::new(n_x, n_y, n_z);
        mesh.grading = grading;
        let mut p = ModelParams::new(epsilon, n_layers, height, h_ex, [omega.0, omega.1], mesh);
        p.lambda = lam;
        p.pad = pad;
        p.cutoff_d = cutoff_d;
        p.validate().map_err(err)?;
        Ok(PyParams { inner: p })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }
    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.n_layers
    }
    #[getter]
    fn h_ex(&self) -> f64 {
        self.inner.h_ex
    }

    fn m_eps(&self) -> PyResult<f64> {
        self.inner.m_eps().map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn domain(&self) -> PyResult<PyDomain> {
        Ok(PyDomain {
            inner: ldgl::build_domain(&self.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(epsilon={}, n_layers={}, h_ex={}, mesh={}x{}x{})",
            p.epsilon, p.n_layers, p.h_ex, p.mesh.n_x, p.mesh.n_y, p.mesh.n_z
        )
    }
}

/// Padded box grid built from `Params`.
#[pyclass(name = "Domain")]
struct PyDomain {
    inner: ldgl::Domain,
}

#[pymethods]
impl PyDomain {
    /// `(nx, ny, nz)` of the padded box
    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.inner.dims();
        (d[0], d[1], d[2])
    }
    /// nodes of `Ω` per axis
    #[getter]
    fn omega_nodes(&self) -> (usize, usize) {
        (self.inner.nx, self.inner.ny)
    }
    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.n_layers()
    }
    fn layer_heights(&self) -> Vec<f64> {
        self.inner.layer_heights()
    }
    fn params(&self) -> PyParams {
        PyParams {
            inner: self.inner.params.clone(),
        }
    }
}

/// Layer order parameters `u_0..u_N` and the vector potential.
#[pyclass(name = "LDState", from_py_object)]
#[derive(Clone)]
struct PyLd {
    inner: LayeredConfiguration,
}

#[pymethods]
impl PyLd {
    #[staticmethod]
    fn normal(dom: &PyDomain) -> Self {
        PyLd {
            inner: LayeredConfiguration::normal_state(&dom.inner),
        }
    }

    /// `u ≡ value` with the background potential
    #[staticmethod]
    #[pyo3(signature = (dom, value=Complex64::new(1.0, 0.0)))]
    fn constant(dom: &PyDomain, value: Complex64) -> Self {
        let d = &dom.inner;
        PyLd {
            inner: LayeredConfiguration {
                layers: LayerStack::constant(d, value),
                pot: Potential3D::background(d, d.params.h_ex),
            },
        }
    }

    #[staticmethod]
    #[pyo3(signature = (dom, seed, noise=0.05))]
    fn random(dom: &PyDomain, seed: u64, noise: f64) -> Self {
        PyLd {
            inner: minimize::random_ld_state(&dom.inner, seed, noise),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let b = std::fs::read(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyLd {
            inner: io::decode_ld(&b).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let b = io::encode_ld(&self.inner).map_err(err)?;
        io::atomic_write(Path::new(path), &b).map_err(err)
    }

    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.layers.u.len()
    }

    /// row-major `ny × nx` values of layer `n`
    fn layer(&self, n: usize) -> PyResult<Vec<Complex64>> {
        self.inner
            .layers
            .u
            .get(n)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("no layer {n}")))
    }

    fn set_layer(&mut self, n: usize, values: Vec<Complex64>) -> PyResult<()> {
        let l = &mut self.inner.layers;
        if n >= l.u.len() || values.len() != l.nx * l.ny {
            return Err(PyValueError::new_err("layer index or length mismatch"));
        }
        l.u[n] = values;
        Ok(())
    }

    fn max_modulus(&self) -> f64 {
        self.inner.layers.max_modulus()
    }

    fn energy<'py>(&self, py: Python<'py>, dom: &PyDomain) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &energy::ld_energy(&dom.inner, &self.inner).map_err(err)?)
    }

    /// `A ↦ εA` (`to_kappa=True`) or `A ↦ A/ε`
    #[pyo3(signature = (epsilon, to_kappa=true))]
    fn rescale_kappa(&self, epsilon: f64, to_kappa: bool) -> PyResult<Self> {
        let dir = if to_kappa {
            KappaDirection::ToKappa
        } else {
            KappaDirection::FromKappa
        };
        Ok(PyLd {
            inner: analysis::rescale_kappa(&self.inner, epsilon, dir).map_err(err)?,
        })
    }
}

/// Continuum order parameter on the grid planes inside `D`.
#[pyclass(name = "AGLState", from_py_object)]
#[derive(Clone)]
struct PyAgl {
    inner: ContinuumConfiguration,
}

#[pymethods]
impl PyAgl {
    #[staticmethod]
    #[pyo3(signature = (dom, seed, noise=0.05))]
    fn random(dom: &PyDomain, seed: u64, noise: f64) -> Self {
        PyAgl {
            inner: minimize::random_agl_state(&dom.inner, seed, noise),
        }
    }

    /// piecewise-linear interpolation of an LD state
    #[staticmethod]
    fn interpolate(dom: &PyDomain, st: &PyLd) -> PyResult<Self> {
        Ok(PyAgl {
            inner: analysis::interpolate_layers(&dom.inner, &st.inner).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let b = std::fs::read(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyAgl {
            inner: io::decode_agl(&b).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let b = io::encode_agl(&self.inner).map_err(err)?;
        io::atomic_write(Path::new(path), &b).map_err(err)
    }

    #[getter]
    fn n_planes(&self) -> usize {
        self.inner.nz
    }

    fn plane(&self, k: usize) -> PyResult<Vec<Complex64>> {
        if k >= self.inner.nz {
            return Err(PyValueError::new_err(format!("no plane {k}")));
        }
        Ok(self.inner.plane(k).to_vec())
    }

    fn energy<'py>(&self, py: Python<'py>, dom: &PyDomain) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &energy::agl_energy(&dom.inner, &self.inner).map_err(err)?)
    }

    fn slice_energies<'py>(&self, py: Python<'py>, dom: &PyDomain) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &analysis::slice_energies(&dom.inner, &self.inner).map_err(err)?)
    }
}

/// Returns `(state, trace)`; `options` follows the `[minimize]` config block.
#[pyfunction]
#[pyo3(signature = (dom, state, options=None))]
fn minimize_ld<'py>(
    py: Python<'py>,
    dom: &PyDomain,
    state: &PyLd,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<(PyLd, Bound<'py, PyAny>)> {
    let opts: MinimizeOptions = from_py(py, options)?;
    let (st, tr) = minimize::minimize_ld(&dom.inner, &state.inner, &opts).map_err(err)?;
    Ok((PyLd { inner: st }, to_py(py, &tr)?))
}

#[pyfunction]
#[pyo3(signature = (dom, state, options=None))]
fn minimize_agl<'py>(
    py: Python<'py>,
    dom: &PyDomain,
    state: &PyAgl,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<(PyAgl, Bound<'py, PyAny>)> {
    let opts: MinimizeOptions = from_py(py, options)?;
    let (st, tr) = minimize::minimize_agl(&dom.inner, &state.inner, &opts).map_err(err)?;
    Ok((PyAgl { inner: st }, to_py(py, &tr)?))
}

/// Vortex-lattice test configuration: `(report, state or None)`.
#[pyfunction]
#[pyo3(signature = (params, options=None))]
fn assemble_test_configuration<'py>(
    py: Python<'py>,
    params: &PyParams,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<(Bound<'py, PyAny>, Option<PyLd>)> {
    let opts: ConstructionOptions = from_py(py, options)?;
    let p = &params.inner;
    let rep = construction::assemble_with(p, p.cutoff_d, &opts).map_err(err)?;
    let st = rep.config.clone().map(|inner| PyLd { inner });
    Ok((to_py(py, &rep)?, st))
}

#[pyfunction]
fn vorticity<'py>(py: Python<'py>, dom: &PyDomain, state: &PyLd) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analysis::vorticity(&dom.inner, &state.inner).map_err(err)?)
}

#[pyfunction]
fn average_vorticity_distance(dom: &PyDomain, state: &PyLd) -> PyResult<f64> {
    analysis::average_vorticity_distance(&dom.inner, &state.inner).map_err(err)
}

#[pyfunction]
fn compare_interpolation<'py>(py: Python<'py>, dom: &PyDomain, state: &PyLd) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analysis::compare_interpolation(&dom.inner, &state.inner).map_err(err)?)
}

#[pyfunction]
fn asymptotic_report<'py>(py: Python<'py>, dom: &PyDomain, state: &PyLd) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analysis::asymptotic_report(&dom.inner, &state.inner).map_err(err)?)
}

#[pyfunction]
fn diagnostics<'py>(py: Python<'py>, dom: &PyDomain, state: &PyLd) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &experiment::diagnostics(&dom.inner, &state.inner).map_err(err)?)
}

/// Finite-difference check of the LD gradient on `n_coords` coordinates.
#[pyfunction]
#[pyo3(signature = (dom, state, fd_step=1e-5, n_coords=200, seed=0))]
fn gradient_check_ld<'py>(
    py: Python<'py>,
    dom: &PyDomain,
    state: &PyLd,
    fd_step: f64,
    n_coords: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = minimize::gradient_check(CheckTarget::Ld(&dom.inner, &state.inner), fd_step, n_coords, seed)
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (dom, state, fd_step=1e-5, n_coords=200, seed=0))]
fn gradient_check_agl<'py>(
    py: Python<'py>,
    dom: &PyDomain,
    state: &PyAgl,
    fd_step: f64,
    n_coords: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = minimize::gradient_check(CheckTarget::Agl(&dom.inner, &state.inner), fd_step, n_coords, seed)
        .map_err(err)?;
    to_py(py, &r)
}

/// Runs an experiment from TOML text; returns the run summary.
#[pyfunction]
#[pyo3(signature = (config_toml, out, task=None, workers=1))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_toml: &str,
    out: &str,
    task: Option<&str>,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    if let Some(t) = task {
        let t: experiment::Task = serde_json::from_value(serde_json::Value::String(t.into()))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg.task = Some(t);
    }
    let s = experiment::run_experiment(&cfg, Path::new(out), workers).map_err(err)?;
    to_py(py, &s)
}

#[pyfunction]
fn verify_run<'py>(py: Python<'py>, run_dir: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &experiment::verify_run(Path::new(run_dir)).map_err(err)?)
}

#[pymodule]
fn pyldgl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyLd>()?;
    m.add_class::<PyAgl>()?;
    m.add_function(wrap_pyfunction!(minimize_ld, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_agl, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_test_configuration, m)?)?;
    m.add_function(wrap_pyfunction!(vorticity, m)?)?;
    m.add_function(wrap_pyfunction!(average_vorticity_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compare_interpolation, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_report, m)?)?;
    m.add_function(wrap_pyfunction!(diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check_ld, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check_agl, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_run, m)?)?;
    Ok(())
}
