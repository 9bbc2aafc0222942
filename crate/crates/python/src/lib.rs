//! Python bindings: polyhedra, problems (JSON or built-in fixtures), search
//! and single-path restrictions. Results come back as plain dicts.

use std::time::Duration;

use gcs_star::domination::CheckerConfig;
use gcs_star::gcs::{validate_problem, Path, VertexId};
use gcs_star::geometry;
use gcs_star::heuristic::{Heuristic, HeuristicSpec};
use gcs_star::io::{LoadedProblem, RunRecord, FIXTURES};
use gcs_star::lp::LpSolver;
use gcs_star::restriction::{solve_restriction, RestrictionOutcome};
use gcs_star::search::{astar_vertex_baseline, gcs_star, SearchOptions};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn solver() -> PyResult<LpSolver> {
    LpSolver::from_env().map_err(value_err)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// `{x : A x <= b}`.
#[pyclass(name = "HPolyhedron", module = "gcs_star_py")]
struct PyHPolyhedron {
    inner: geometry::HPolyhedron,
}

#[pymethods]
impl PyHPolyhedron {
    #[new]
    #[pyo3(signature = (a, b))]
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: geometry::HPolyhedron::from_rows(&a, &b).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_box(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: geometry::HPolyhedron::from_box(&lo, &hi).map_err(value_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&DVector::from_vec(x), tol).map_err(value_err)
    }

    /// Center and radius of the largest inscribed ball.
    fn chebyshev_center(&self) -> PyResult<(Vec<f64>, f64)> {
        let ball = self.inner.chebyshev_center(&solver()?).map_err(runtime_err)?;
        Ok((ball.center.iter().copied().collect(), ball.radius))
    }

    fn intersect(&self, other: &PyHPolyhedron) -> PyResult<Self> {
        Ok(Self { inner: self.inner.intersect(&other.inner).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("serializable")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(value_err)? })
    }

    fn __repr__(&self) -> String {
        format!("HPolyhedron(dim={}, rows={})", self.inner.dim(), self.inner.num_rows())
    }
}

/// Explicit problem or pushing environment.
#[pyclass(name = "Problem", module = "gcs_star_py")]
struct PyProblem {
    inner: LoadedProblem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: LoadedProblem::from_json(text).map_err(value_err)? })
    }

    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        Ok(Self { inner: LoadedProblem::fixture(name).map_err(value_err)? })
    }

    #[getter]
    fn source(&self) -> String {
        self.inner.graph().source().to_string()
    }

    #[getter]
    fn target(&self) -> String {
        self.inner.graph().target().to_string()
    }

    /// Problems found in an explicit graph; empty when it is well formed.
    fn validate(&self) -> PyResult<Vec<String>> {
        match &self.inner {
            LoadedProblem::Explicit(g) => Ok(validate_problem(g, &solver()?).iter().map(|v| v.to_string()).collect()),
            LoadedProblem::Pushing(_) => Err(value_err("validation applies to explicit problems only")),
        }
    }

    /// Runs GCS* (or the single-path A* baseline with `astar-baseline`) and
    /// returns the run record as a dict.
    #[pyo3(signature = (checker = "rc-containment", heuristic = "shortcut", epsilon = 1.0, samples = 1, seed = 0,
                        max_path_len = None, max_expansions = None, timeout = None, parallel = false))]
    #[allow(clippy::too_many_arguments)]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        checker: &str,
        heuristic: &str,
        epsilon: f64,
        samples: usize,
        seed: u64,
        max_path_len: Option<usize>,
        max_expansions: Option<usize>,
        timeout: Option<f64>,
        parallel: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        if samples == 0 {
            return Err(value_err("samples must be at least 1"));
        }
        let g = self.inner.graph();
        let solver = solver()?;
        let spec = HeuristicSpec::from_key(heuristic, g, epsilon).map_err(value_err)?;
        let heuristic_key = spec.to_string();
        let h = Heuristic::new(spec, g, &solver).map_err(value_err)?;
        let timeout = timeout.map(Duration::try_from_secs_f64).transpose().map_err(value_err)?;
        let opts = SearchOptions { max_path_len, max_expansions, timeout, parallel };
        let result = if checker == "astar-baseline" {
            astar_vertex_baseline(g, &h, &opts, &solver)
        } else {
            let config: CheckerConfig = checker.parse().map_err(value_err)?;
            gcs_star(g, &h, &config.with_samples(samples).with_seed(seed), &opts, &solver)
        }
        .map_err(runtime_err)?;
        json_to_py(py, &RunRecord::new(&result, seed, checker, &heuristic_key).to_json())
    }

    /// Optimal trajectory through a fixed vertex sequence, or `None` when
    /// the sequence is infeasible.
    fn restriction<'py>(&self, py: Python<'py>, path: Vec<String>) -> PyResult<Option<Bound<'py, PyAny>>> {
        if path.is_empty() {
            return Err(value_err("path is empty"));
        }
        let path = Path::new(path.into_iter().map(VertexId::new).collect());
        let outcome = solve_restriction(self.inner.graph(), &path, &Heuristic::zero(), &solver()?).map_err(value_err)?;
        match outcome {
            RestrictionOutcome::Infeasible => Ok(None),
            RestrictionOutcome::Optimal(sol) => {
                let points: Vec<Vec<f64>> = sol.trajectory.points.iter().map(|p| p.iter().copied().collect()).collect();
                let text = serde_json::json!({ "cost": sol.cost_to_come, "trajectory": points }).to_string();
                json_to_py(py, &text).map(Some)
            }
        }
    }
}

/// Membership of `y` in `{ T xi + t : xi in base }`.
#[pyfunction]
#[pyo3(signature = (base, t_matrix, t_offset, y, tol = 1e-9))]
fn ah_polytope_contains(base: &PyHPolyhedron, t_matrix: Vec<Vec<f64>>, t_offset: Vec<f64>, y: Vec<f64>, tol: f64) -> PyResult<bool> {
    let rows = t_matrix.len();
    let cols = t_matrix.first().map_or(0, Vec::len);
    if t_matrix.iter().any(|r| r.len() != cols) {
        return Err(value_err("ragged matrix"));
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| t_matrix[i][j]);
    let p = geometry::AHPolytope::new(base.inner.clone(), m, DVector::from_vec(t_offset)).map_err(value_err)?;
    p.contains(&DVector::from_vec(y), &solver()?, tol).map_err(value_err)
}

#[pyfunction]
fn fixtures() -> Vec<&'static str> {
    FIXTURES.to_vec()
}

#[pyfunction]
fn checker_keys() -> Vec<String> {
    CheckerConfig::all().iter().map(|c| c.key()).chain(["astar-baseline".to_string()]).collect()
}

#[pymodule]
fn gcs_star_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHPolyhedron>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(ah_polytope_contains, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(checker_keys, m)?)?;
    Ok(())
}
