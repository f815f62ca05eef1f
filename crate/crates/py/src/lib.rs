//! Python module `dampnls`: grids, fields, ground states, profiles, runs and
//! diagnostics. Structured results come back as plain Python objects.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use dampnls::diagnostics::{self, FitOptions, RateSample};
use dampnls::dynamics::{self as dyn_, InitialData, SimConfig};
use dampnls::error::Error;
use dampnls::experiments;
use dampnls::field;
use dampnls::ground_state;
use dampnls::modulation::{ModulationOptions, Modulator};
use dampnls::profiles;

create_exception!(dampnls, NlsError, PyException);

fn err(e: Error) -> PyErr {
    NlsError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| err(e.into()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: field::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(d: usize, n: usize, half_width: f64) -> PyResult<Self> {
        Ok(PyGrid {
            inner: field::Grid::new(d, n, half_width).map_err(err)?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx
    }

    /// Coordinates along one axis.
    fn axis(&self) -> Vec<f64> {
        (0..self.inner.n).map(|i| self.inner.coord(i)).collect()
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!("Grid(d={}, n={}, half_width={})", g.d, g.n, g.half_width)
    }
}

#[pyclass(name = "Field", skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: field::Field,
}

#[pymethods]
impl PyField {
    /// Field from flat row-major samples.
    #[new]
    #[pyo3(signature = (grid, values, time = 0.0))]
    fn new(grid: &PyGrid, values: Vec<Complex64>, time: f64) -> PyResult<Self> {
        Ok(PyField {
            inner: field::Field::from_values(grid.inner, values, time).map_err(err)?,
        })
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid,
        }
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.inner.values.clone()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn observables<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &field::observables(&self.inner).map_err(err)?)
    }

    /// Advance in place by `steps` split steps of size `dt` with friction `a`.
    #[pyo3(signature = (dt, a, steps = 1))]
    fn step(&mut self, dt: f64, a: f64, steps: usize) {
        let st = dyn_::Stepper::new(self.inner.grid, a, true, true);
        for _ in 0..steps {
            st.step(&mut self.inner, dt);
        }
    }
}

#[pyclass(name = "GroundState", frozen)]
struct PyGroundState {
    inner: &'static ground_state::GroundState,
}

#[pymethods]
impl PyGroundState {
    #[new]
    #[pyo3(signature = (d = 1))]
    fn new(d: usize) -> PyResult<Self> {
        Ok(PyGroundState {
            inner: ground_state::cached_ground_state(d).map_err(err)?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn q0(&self) -> f64 {
        self.inner.q0
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.r.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.clone()
    }

    /// `Q(r)`.
    fn __call__(&self, r: f64) -> f64 {
        self.inner.eval(r).0
    }

    /// `λ^{−d/2}Q((x−x0)/λ)e^{iγ}` on `grid`.
    #[pyo3(signature = (grid, lam = 1.0, gamma = 0.0, x0 = None))]
    fn sample(&self, grid: &PyGrid, lam: f64, gamma: f64, x0: Option<Vec<f64>>) -> PyResult<PyField> {
        let x0 = x0.unwrap_or_else(|| vec![0.0; grid.inner.d]);
        let s = ground_state::sample_on_grid(self.inner, &grid.inner, lam, gamma, &x0).map_err(err)?;
        Ok(PyField { inner: s.field })
    }

    /// `E(u) − ½‖∇u‖²(1 − (M(u)/M(Q))^{2/d})`, nonnegative by sharp
    /// Gagliardo–Nirenberg.
    fn gn_certificate(&self, u: &PyField) -> PyResult<f64> {
        field::gn_certificate(&u.inner, self.inner).map_err(err)
    }
}

/// Summary and tables of the profile `Q_b`.
#[pyfunction]
#[pyo3(signature = (b, eta = 0.05, d = 1))]
fn profile<'py>(py: Python<'py>, b: f64, eta: f64, d: usize) -> PyResult<Bound<'py, PyAny>> {
    let p = profiles::profile(b, eta, d, 1e-10, profiles::ProfileOptions::default()).map_err(err)?;
    to_py(py, &p)
}

/// Integrate a run configuration (JSON text, same schema as the CLI) and
/// return the time series and stop reason; nothing is written to disk.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = experiments::parse_run_config(config_json).map_err(err)?;
    let out = py
        .detach(|| -> Result<_, Error> {
            let gs = ground_state::cached_ground_state(cfg.sim.d)?;
            let init = dyn_::make_initial_data(&cfg.initial_data, &cfg.sim.grid, gs, cfg.sim.seed)?;
            let mut sim: SimConfig = cfg.sim.clone();
            sim.snapshot_stride = 0;
            dyn_::run(&sim, init.field, gs)
        })
        .map_err(err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        rows: &'a [dyn_::SeriesRow],
        stop_reason: dyn_::StopReason,
        status: dyn_::Status,
        steps: usize,
    }
    let res = to_py(
        py,
        &Out {
            rows: &out.series.rows,
            stop_reason: out.stop,
            status: out.state.status,
            steps: out.state.step_count,
        },
    )?;
    Ok(res)
}

/// Run a configuration into `out_root` exactly like `dampnls run`.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, config_json: &str, out_root: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = experiments::parse_run_config(config_json).map_err(err)?;
    let s = py.detach(|| experiments::execute_run(&cfg, &out_root)).map_err(err)?;
    to_py(py, &s)
}

/// Initial field from a JSON initial-data recipe.
#[pyfunction]
#[pyo3(signature = (kind_json, grid, seed = 0))]
fn initial_data(kind_json: &str, grid: &PyGrid, seed: u64) -> PyResult<PyField> {
    let kind: InitialData = serde_json::from_str(kind_json).map_err(|e| err(e.into()))?;
    let gs = ground_state::cached_ground_state(grid.inner.d).map_err(err)?;
    let out = dyn_::make_initial_data(&kind, &grid.inner, gs, seed).map_err(err)?;
    Ok(PyField { inner: out.field })
}

/// Blow-up rate fit of `(t, λ, b)` samples.
#[pyfunction]
#[pyo3(signature = (t, lam, b = None, decades = 1.0))]
fn fit_blowup<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    lam: Vec<f64>,
    b: Option<Vec<f64>>,
    decades: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let b = b.unwrap_or_else(|| vec![f64::NAN; t.len()]);
    if lam.len() != t.len() || b.len() != t.len() {
        return Err(err(Error::Config("t, lam and b must have equal length".into())));
    }
    let s: Vec<RateSample> = (0..t.len())
        .map(|i| RateSample { t: t[i], lambda: lam[i], b: b[i] })
        .collect();
    let opts = FitOptions { decades, ..FitOptions::default() };
    to_py(py, &diagnostics::fit_blowup(&s, &opts).map_err(err)?)
}

/// Modulation parameters `(λ, b, γ, x0)` of `u`.
#[pyfunction]
fn decompose<'py>(py: Python<'py>, u: &PyField) -> PyResult<Bound<'py, PyAny>> {
    let gs = ground_state::cached_ground_state(u.inner.grid.d).map_err(err)?;
    let m = Modulator::new(gs, u.inner.grid, ModulationOptions::default());
    let guess = m.quick_estimate(&u.inner).map_err(err)?;
    let st = m.decompose(&u.inner, &guess).map_err(err)?;
    to_py(py, &st)
}

/// `∫_{|x−c|<w}|u|²` against `∫Q²`, centered at the maximum of `|u|`.
#[pyfunction]
fn concentration<'py>(py: Python<'py>, u: &PyField, w: f64) -> PyResult<Bound<'py, PyAny>> {
    let gs = ground_state::cached_ground_state(u.inner.grid.d).map_err(err)?;
    to_py(py, &diagnostics::concentration(&u.inner, None, w, gs).map_err(err)?)
}

#[pymodule]
#[pyo3(name = "dampnls")]
fn dampnls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NlsError", m.py().get_type::<NlsError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyGroundState>()?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(initial_data, m)?)?;
    m.add_function(wrap_pyfunction!(fit_blowup, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(concentration, m)?)?;
    Ok(())
}
