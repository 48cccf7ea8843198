//! Python bindings. Reports are returned as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use porous_obstacle::approximation::{build_eps_family, convergence_report, oleinik_pairing};
use porous_obstacle::grid::{enumerate_boxes_ordered, EnumerationOrder};
use porous_obstacle::harnack::harnack_quantities;
use porous_obstacle::obstacle::solve_obstacle_lsc;
use porous_obstacle::pme::{self, BvpSpec};
use porous_obstacle::runconfig::{run_case, CaseReport, RunConfig};
use porous_obstacle::verify;
use porous_obstacle::{Error, ObstacleConfig, SpaceTimeBox};

fn py_err(e: Error) -> PyErr {
    if e.is_configuration() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyclass(frozen, skip_from_py_object, name = "Grid")]
#[derive(Clone)]
struct PyGrid(porous_obstacle::SpaceTimeGrid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (domain, n_space, n_time, t_final))]
    fn new(domain: Vec<(f64, f64)>, n_space: Vec<usize>, n_time: usize, t_final: f64) -> PyResult<Self> {
        porous_obstacle::build_grid(&domain, &n_space, n_time, t_final).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n_time(&self) -> usize {
        self.0.n_time()
    }

    #[getter]
    fn n_space(&self) -> Vec<usize> {
        self.0.n_space_all().to_vec()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    fn h(&self, axis: usize) -> PyResult<f64> {
        if axis >= self.0.dim() {
            return Err(PyValueError::new_err("axis out of range"));
        }
        Ok(self.0.h(axis))
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0.to_spec())
    }

    /// `(level, box_id, lo, hi, t_start)` for every box up to `level`.
    #[pyo3(signature = (level, reversed=false))]
    fn enumerate_boxes(&self, level: usize, reversed: bool) -> Vec<(usize, usize, Vec<usize>, Vec<usize>, usize)> {
        let order = if reversed {
            EnumerationOrder::ReversedWithinLevel
        } else {
            EnumerationOrder::Lexicographic
        };
        enumerate_boxes_ordered(&self.0, level, order)
            .into_iter()
            .map(|eb| (eb.level, eb.id, eb.bx.lo, eb.bx.hi, eb.bx.t_start))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n_space={:?}, n_time={}, T={})", self.0.n_space_all(), self.0.n_time(), self.0.t_final())
    }
}

/// Nodal values, spatial index fastest, then time level.
#[pyclass(frozen, skip_from_py_object, name = "Field")]
#[derive(Clone)]
struct PyField(porous_obstacle::ScalarField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        porous_obstacle::ScalarField::from_values(&grid.0, values).map(PyField).map_err(py_err)
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> PyResult<Self> {
        porous_obstacle::ScalarField::constant(&grid.0, value).map(PyField).map_err(py_err)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        porous_obstacle::ScalarField::from_csv(text).map(PyField).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn get(&self, s: usize, k: usize) -> PyResult<f64> {
        let g = self.0.grid();
        if s >= g.n_nodes_space() || k >= g.n_time() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.0.get(s, k))
    }

    fn sup(&self) -> f64 {
        self.0.sup()
    }

    fn min(&self) -> f64 {
        self.0.min()
    }

    fn sup_distance(&self, other: &PyField) -> PyResult<f64> {
        self.0.sup_distance(&other.0).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(name = "barenblatt", signature = (x, t, m, n, c))]
fn barenblatt_value(x: Vec<f64>, t: f64, m: f64, n: usize, c: f64) -> PyResult<f64> {
    pme::barenblatt(&x, t, m, n, c).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (grid, m, c, t_shift=1.0))]
fn barenblatt_field(grid: &PyGrid, m: f64, c: f64, t_shift: f64) -> PyResult<PyField> {
    let profile = pme::Barenblatt::new(m, grid.0.dim(), c).map_err(py_err)?;
    pme::barenblatt_field(&grid.0, &profile, t_shift).map(PyField).map_err(py_err)
}

/// Solution with boundary data read from `data` on the parabolic boundary
/// of the box (the whole cylinder by default).
#[pyfunction]
#[pyo3(signature = (data, m, lo=None, hi=None, t_start=0))]
fn solve_bvp(data: &PyField, m: f64, lo: Option<Vec<usize>>, hi: Option<Vec<usize>>, t_start: usize) -> PyResult<PyField> {
    let grid = data.0.grid();
    let full = SpaceTimeBox::full(grid);
    let bx = SpaceTimeBox::new(lo.unwrap_or(full.lo), hi.unwrap_or(full.hi), t_start);
    let spec = BvpSpec {
        bx,
        data: data.0.clone(),
    };
    pme::solve_bvp(&spec, &pme::SolverConfig::new(m)).map(PyField).map_err(py_err)
}

/// Minimal supersolution above `obstacle`; returns the field and the
/// per-stage summaries as JSON.
#[pyfunction]
#[pyo3(signature = (obstacle, m, lsc=false, stop_tol=None, reversed=false))]
fn solve_obstacle(
    py: Python<'_>,
    obstacle: &PyField,
    m: f64,
    lsc: bool,
    stop_tol: Option<f64>,
    reversed: bool,
) -> PyResult<(PyField, String)> {
    let regularity = if lsc {
        porous_obstacle::Regularity::LowerSemicontinuous
    } else {
        porous_obstacle::Regularity::Continuous
    };
    let psi = porous_obstacle::Obstacle::new(obstacle.0.clone(), regularity);
    let mut cfg = ObstacleConfig::new(m);
    cfg.stop_tol = stop_tol;
    if reversed {
        cfg.order = EnumerationOrder::ReversedWithinLevel;
    }
    let out = py.detach(|| solve_obstacle_lsc(&psi, &cfg)).map_err(py_err)?;
    let stages: Vec<_> = out
        .steps
        .iter()
        .map(|s| {
            serde_json::json!({
                "k": s.k,
                "obstacle_gap": s.obstacle_gap,
                "change": s.change,
                "sweeps": s.trace.sweep_count(),
                "box_solves": s.trace.box_solves(),
                "stop_reason": s.trace.stop_reason,
            })
        })
        .collect();
    Ok((PyField(out.u), to_json(&stages)?))
}

/// Runs a JSON run config; returns the solution and the case report.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<(PyField, String)> {
    let cfg = RunConfig::from_json(config).map_err(py_err)?;
    let run = py.detach(|| run_case(&cfg)).map_err(py_err)?;
    let report = CaseReport::new(&cfg, &run).map_err(py_err)?;
    Ok((PyField(run.u), to_json(&report)?))
}

#[pyfunction]
#[pyo3(signature = (u, m, battery_size=verify::DEFAULT_BATTERY))]
fn certify_supersolution(u: &PyField, m: f64, battery_size: usize) -> PyResult<String> {
    to_json(&verify::certify_supersolution(&u.0, m, battery_size).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (u, m, mask, battery_size=verify::DEFAULT_BATTERY))]
fn certify_subsolution(u: &PyField, m: f64, mask: Vec<bool>, battery_size: usize) -> PyResult<String> {
    to_json(&verify::certify_subsolution(&u.0, m, battery_size, &mask).map_err(py_err)?)
}

/// ε-family of `base` and its convergence report.
#[pyfunction]
#[pyo3(signature = (base, m, schedule, q=1.0, p=2.0, t0=0.5))]
fn approx_eps(
    py: Python<'_>,
    base: &PyField,
    m: f64,
    schedule: Vec<f64>,
    q: f64,
    p: f64,
    t0: f64,
) -> PyResult<(Vec<PyField>, String)> {
    let cfg = ObstacleConfig::new(m);
    let family = py.detach(|| build_eps_family(&base.0, &schedule, &cfg)).map_err(py_err)?;
    let report = convergence_report(&family, q, p, t0).map_err(py_err)?;
    let members = family.members.into_iter().map(PyField).collect();
    Ok((members, to_json(&report)?))
}

#[pyfunction]
fn oleinik(u_eps: &PyField, u: &PyField, eps: f64, m: f64, bound: f64) -> PyResult<String> {
    to_json(&oleinik_pairing(&u_eps.0, &u.0, eps, m, bound).map_err(py_err)?)
}

#[pyfunction]
fn harnack(u: &PyField, x0: Vec<f64>, rho: f64, t0: f64, c1: f64, m: f64) -> PyResult<String> {
    to_json(&harnack_quantities(&u.0, &x0, rho, t0, c1, m).map_err(py_err)?)
}

/// Verdicts for the named suites over JSON run configs.
#[pyfunction]
fn run_suite(py: Python<'_>, configs: Vec<String>, suites: Vec<String>) -> PyResult<String> {
    let cases = configs
        .iter()
        .map(|c| RunConfig::from_json(c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let verdicts = py.detach(|| verify::run_suite(&cases, &suites)).map_err(py_err)?;
    to_json(&verdicts)
}

#[pymodule]
fn pmeobs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(barenblatt_value, m)?)?;
    m.add_function(wrap_pyfunction!(barenblatt_field, m)?)?;
    m.add_function(wrap_pyfunction!(solve_bvp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_obstacle, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(certify_supersolution, m)?)?;
    m.add_function(wrap_pyfunction!(certify_subsolution, m)?)?;
    m.add_function(wrap_pyfunction!(approx_eps, m)?)?;
    m.add_function(wrap_pyfunction!(oleinik, m)?)?;
    m.add_function(wrap_pyfunction!(harnack, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add("SCHEMA_VERSION", porous_obstacle::runconfig::SCHEMA_VERSION)?;
    Ok(())
}
