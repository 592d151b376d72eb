//! Python bindings: `import boxes_sim`.

use std::path::PathBuf;

use boxes_core::verify::{run_check, Check};
use boxes_core::{
    build_scenario, load_config, parse_config, probability, propagate_packet_analytic, run_ensemble_with,
    snapshot_sequence, BoxId, Direction, Error, FieldFile, Formulation, GaussianPacket, OutcomeModel, PhysicalParams,
    Scenario,
};
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr>(text: &str, what: &str) -> PyResult<T> {
    text.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{text}`")))
}

type CheckRow = (String, String, f64, f64, bool);

#[pyclass(name = "PhysicalParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams(PhysicalParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (hbar = 1.0, mass = 1.0, sigma0 = 50.0, kx = 0.4))]
    fn new(hbar: f64, mass: f64, sigma0: f64, kx: f64) -> PyResult<Self> {
        PhysicalParams::new(hbar, mass, sigma0, kx).map(Self).map_err(to_py)
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    #[getter]
    fn sigma0(&self) -> f64 {
        self.0.sigma0
    }

    #[getter]
    fn kx(&self) -> f64 {
        self.0.kx
    }

    fn group_speed(&self) -> f64 {
        self.0.group_speed()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "PhysicalParams(hbar={}, mass={}, sigma0={}, kx={})",
            p.hbar, p.mass, p.sigma0, p.kx
        )
    }
}

/// Free Gaussian packet in closed form.
#[pyclass(name = "GaussianPacket", frozen, from_py_object)]
#[derive(Clone)]
struct PyPacket(GaussianPacket);

#[pymethods]
impl PyPacket {
    #[new]
    fn new(center: [f64; 2], sigma: f64, wavevector: [f64; 2]) -> PyResult<Self> {
        GaussianPacket::new(center, sigma, wavevector).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn source(params: &PyParams) -> Self {
        Self(GaussianPacket::source(&params.0))
    }

    /// Evolves by `dt` >= 0, backward when `advanced` is true.
    #[pyo3(signature = (dt, params, advanced = false))]
    fn evolve(&self, dt: f64, params: &PyParams, advanced: bool) -> PyResult<Self> {
        let dir = if advanced {
            Direction::Advanced
        } else {
            Direction::Retarded
        };
        propagate_packet_analytic(&self.0, dt, &params.0, dir)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn center(&self) -> [f64; 2] {
        self.0.center
    }

    #[getter]
    fn wavevector(&self) -> [f64; 2] {
        self.0.wavevector
    }

    #[getter]
    fn t_ref(&self) -> f64 {
        self.0.t_ref
    }

    fn density_std(&self) -> f64 {
        self.0.density_std()
    }

    fn amplitude_at(&self, x: f64, y: f64) -> Complex64 {
        self.0.amplitude_at(x, y)
    }

    fn __repr__(&self) -> String {
        format!(
            "GaussianPacket(center={:?}, density_std={}, t_ref={})",
            self.0.center,
            self.0.density_std(),
            self.0.t_ref
        )
    }
}

/// The experiment: parameters, geometry, splitter, grids and panel times.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario(Scenario);

#[pymethods]
impl PyScenario {
    /// Reference setup, or the given TOML config text.
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<&str>) -> PyResult<Self> {
        let cfg = match config {
            Some(text) => parse_config(text).map_err(to_py)?,
            None => Default::default(),
        };
        build_scenario(&cfg).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let cfg = load_config(&path).map_err(to_py)?;
        build_scenario(&cfg).map(Self).map_err(to_py)
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.0.params)
    }

    #[getter]
    fn panel_times(&self) -> Vec<f64> {
        self.0.panel_times.clone()
    }

    fn arrival_time(&self) -> f64 {
        self.0.arrival_time()
    }

    fn source_packet(&self) -> PyPacket {
        PyPacket(self.0.source_packet())
    }

    /// (amplitude, probability) for `formulation` ("cf" or "tsf") in `box`.
    #[pyo3(signature = (formulation, r#box = "b1"))]
    fn probability(&self, py: Python<'_>, formulation: &str, r#box: &str) -> PyResult<(Complex64, f64)> {
        let f: Formulation = parse(formulation, "formulation")?;
        let b: BoxId = parse(r#box, "box")?;
        let r = py.detach(|| probability(&self.0, f, b)).map_err(to_py)?;
        Ok((r.amplitude, r.probability))
    }

    /// Density panels as dicts with time, quantity, nx, ny, dx, origin and a
    /// row-major list of values.
    #[pyo3(signature = (formulation, final_box = None))]
    fn snapshots<'py>(
        &self,
        py: Python<'py>,
        formulation: &str,
        final_box: Option<&str>,
    ) -> PyResult<Bound<'py, PyList>> {
        let f: Formulation = parse(formulation, "formulation")?;
        let b = final_box.map(|b| parse::<BoxId>(b, "box")).transpose()?;
        let panels = py.detach(|| snapshot_sequence(&self.0, f, b)).map_err(to_py)?;
        let out = PyList::empty(py);
        for s in &panels {
            let file = FieldFile::from_snapshot(s).map_err(to_py)?;
            out.append(field_dict(py, &file)?)?;
        }
        Ok(out)
    }

    /// Monte Carlo outcome counts: {"b1": n, "b2": n, "no_detection": n}.
    #[pyo3(signature = (formulation, n_runs, seed, renormalize_outcomes = false))]
    fn sample<'py>(
        &self,
        py: Python<'py>,
        formulation: &str,
        n_runs: u64,
        seed: u64,
        renormalize_outcomes: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let f: Formulation = parse(formulation, "formulation")?;
        let mut model = OutcomeModel::from_scenario(&self.0, f).map_err(to_py)?;
        if renormalize_outcomes && !model.renormalized_outcomes {
            model = model.renormalized().map_err(to_py)?;
        }
        let summary = py
            .detach(|| run_ensemble_with(&model, n_runs, seed, |_| {}))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        for t in &summary.outcomes {
            d.set_item(t.outcome.name(), t.count)?;
        }
        Ok(d)
    }

    /// Runs the named self-checks (all by default) and returns
    /// (check, case, measured, tolerance, passed) tuples.
    #[pyo3(signature = (checks = None))]
    fn verify(&self, py: Python<'_>, checks: Option<Vec<String>>) -> PyResult<Vec<CheckRow>> {
        let checks: Vec<Check> = match checks {
            Some(names) => names.iter().map(|n| parse(n, "check")).collect::<PyResult<_>>()?,
            None => Check::ALL.to_vec(),
        };
        let mut out = Vec::new();
        for c in checks {
            let results = py.detach(|| run_check(&self.0, c, None)).map_err(to_py)?;
            out.extend(
                results
                    .into_iter()
                    .map(|r| (r.check.to_string(), r.case, r.measured, r.tolerance, r.passed)),
            );
        }
        Ok(out)
    }
}

fn field_dict<'py>(py: Python<'py>, f: &FieldFile) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("time", f.time)?;
    d.set_item("quantity", f.quantity.tag())?;
    d.set_item("nx", f.nx)?;
    d.set_item("ny", f.ny)?;
    d.set_item("dx", f.dx)?;
    d.set_item("dy", f.dy)?;
    d.set_item("origin", f.origin)?;
    d.set_item("values", &f.values)?;
    Ok(d)
}

/// Reads a `.grid` field file into a dict (see `Scenario.snapshots`).
#[pyfunction]
fn read_field(py: Python<'_>, path: PathBuf) -> PyResult<Bound<'_, PyDict>> {
    let f = FieldFile::load(&path).map_err(to_py)?;
    field_dict(py, &f)
}

#[pymodule]
fn boxes_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyPacket>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    Ok(())
}
