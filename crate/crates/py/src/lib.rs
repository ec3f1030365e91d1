//! Python bindings. Point sets travel as lists of rows; results come back
//! as plain floats, lists and dicts.

use std::collections::BTreeMap;

use otcpcc::cpcc::{self as core_cpcc, Backend, ClassBatch, FlowWeightScheme, RhoParams};
use otcpcc::measures::{self, WeightedPointSet};
use otcpcc::ot_approx::{self, SinkhornParams, DEFAULT_PROJECTIONS};
use otcpcc::ot_exact;
use otcpcc::trees;
use otcpcc::Error;
use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Unsupported(_) => PyNotImplementedError::new_err(e.to_string()),
        Error::Solver(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Weighted point cloud; uniform weights when none are given.
#[pyclass(name = "PointSet", module = "pyotcpcc", frozen)]
struct PyPointSet {
    inner: WeightedPointSet,
}

#[pymethods]
impl PyPointSet {
    #[new]
    #[pyo3(signature = (points, weights=None))]
    fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = WeightedPointSet::from_rows(&points, weights).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner
            .points()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("PointSet(n={}, d={})", self.inner.len(), self.inner.dim())
    }
}

/// Sparse transport plan as `(i, j, mass)` triplets.
#[pyclass(name = "FlowPlan", module = "pyotcpcc", frozen)]
struct PyFlowPlan {
    inner: measures::FlowPlan,
}

#[pymethods]
impl PyFlowPlan {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.inner.entries().to_vec()
    }

    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        self.inner
            .to_dense()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    /// Whether the marginals match `a` and `b` within the library tolerance.
    fn is_feasible(&self, a: Vec<f64>, b: Vec<f64>) -> bool {
        measures::validate_plan(&self.inner, &a, &b).valid
    }

    fn __repr__(&self) -> String {
        let (m, n) = self.inner.shape();
        format!("FlowPlan(shape=({m}, {n}), nnz={})", self.inner.nnz())
    }
}

/// Class hierarchy with weighted edges, loaded from JSON.
#[pyclass(name = "LabelTree", module = "pyotcpcc", frozen)]
struct PyLabelTree {
    inner: trees::LabelTree,
}

#[pymethods]
impl PyLabelTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: trees::LabelTree::from_json_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: trees::LabelTree::from_json_file(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().map(str::to_string).collect()
    }

    fn distance(&self, u: &str, v: &str) -> PyResult<f64> {
        self.inner.distance(u, v).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }
}

fn backend(name: &str) -> PyResult<Backend> {
    name.parse().map_err(to_py)
}

fn rho_params(epsilon: f64, projections: usize, seed: u64) -> RhoParams {
    RhoParams {
        sinkhorn: SinkhornParams {
            epsilon,
            ..SinkhornParams::default()
        },
        projections,
        seed,
    }
}

/// Exact EMD; returns `(value, plan)`.
#[pyfunction]
fn emd(py: Python<'_>, a: &PyPointSet, b: &PyPointSet) -> PyResult<(f64, PyFlowPlan)> {
    let s = py
        .detach(|| ot_exact::emd_exact(&a.inner, &b.inner))
        .map_err(to_py)?;
    Ok((s.value, PyFlowPlan { inner: s.plan }))
}

/// Sorted-sample 1d EMD for equal-size uniform samples.
#[pyfunction]
fn emd_1d(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    ot_exact::emd_1d(&x, &y).map_err(to_py)
}

/// North-west-corner matching of two simplex weight vectors.
#[pyfunction]
fn greedy_flow_matching(a: Vec<f64>, b: Vec<f64>) -> PyResult<PyFlowPlan> {
    let inner = ot_exact::greedy_flow_matching(&a, &b).map_err(to_py)?;
    Ok(PyFlowPlan { inner })
}

/// Entropic OT; returns a dict with `value`, `plan`, `converged`, `iterations`.
#[pyfunction]
#[pyo3(signature = (a, b, epsilon=10.0, max_iters=200, tol=1e-6))]
fn sinkhorn<'py>(
    py: Python<'py>,
    a: &PyPointSet,
    b: &PyPointSet,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let params = SinkhornParams {
        epsilon,
        max_iters,
        tol,
    };
    let s = py
        .detach(|| ot_approx::sinkhorn(&a.inner, &b.inner, params))
        .map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("value", s.value)?;
    out.set_item("plan", PyFlowPlan { inner: s.plan })?;
    out.set_item("converged", s.converged)?;
    out.set_item("iterations", s.iterations)?;
    out.set_item("marginal_error", s.marginal_error)?;
    Ok(out)
}

/// Distance under any backend: l2, emd, sinkhorn, swd, twd, flowtree, fastft.
#[pyfunction]
#[pyo3(signature = (method, a, b, epsilon=10.0, projections=DEFAULT_PROJECTIONS, seed=0))]
fn distance(
    py: Python<'_>,
    method: &str,
    a: &PyPointSet,
    b: &PyPointSet,
    epsilon: f64,
    projections: usize,
    seed: u64,
) -> PyResult<f64> {
    let m = backend(method)?;
    let params = rho_params(epsilon, projections, seed);
    py.detach(|| core_cpcc::point_set_distance(m, &a.inner, &b.inner, &params))
        .map(|d| d.value)
        .map_err(to_py)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, bool)> {
    let r = core_cpcc::pearson(&x, &y).map_err(to_py)?;
    Ok((r.value, r.degenerate))
}

/// CPCC of per-class features against a label tree.
///
/// `data` maps class labels to lists of feature rows. Returns a dict with
/// `value`, `degenerate`, `pairs` (`(u, v, t, rho)` tuples) and, when
/// `gradient` is set, `gradients` mapping labels to row lists.
#[pyfunction]
#[pyo3(signature = (data, tree, backend="emd", flow_weights="uniform", gradient=false, epsilon=10.0, projections=DEFAULT_PROJECTIONS, seed=0))]
#[allow(clippy::too_many_arguments)]
fn cpcc<'py>(
    py: Python<'py>,
    data: BTreeMap<String, Vec<Vec<f64>>>,
    tree: &PyLabelTree,
    backend: &str,
    flow_weights: &str,
    gradient: bool,
    epsilon: f64,
    projections: usize,
    seed: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let m = self::backend(backend)?;
    let scheme: FlowWeightScheme = flow_weights.parse().map_err(to_py)?;
    let params = rho_params(epsilon, projections, seed);
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (label, class_rows) in data {
        for r in class_rows {
            labels.push(label.clone());
            rows.push(r);
        }
    }
    let features = WeightedPointSet::from_rows(&rows, None).map_err(to_py)?;
    let result = py
        .detach(|| {
            let batch = ClassBatch::from_labeled_rows(&labels, features.points())?
                .with_flow_weights(scheme)?;
            core_cpcc::evaluate_cpcc(&batch, &tree.inner, m, &params, gradient)
        })
        .map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("value", result.value)?;
    out.set_item("degenerate", result.degenerate)?;
    let pairs: Vec<(String, String, f64, f64)> = result
        .pairs
        .into_iter()
        .map(|p| (p.u, p.v, p.t, p.rho))
        .collect();
    out.set_item("pairs", pairs)?;
    if let Some(grads) = result.gradients {
        let g: BTreeMap<String, Vec<Vec<f64>>> = grads
            .into_iter()
            .map(|(l, a)| (l, a.rows().into_iter().map(|r| r.to_vec()).collect()))
            .collect();
        out.set_item("gradients", g)?;
    }
    Ok(out)
}

/// Finite-difference check of the CPCC gradient on a fixed three-class tree.
#[pyfunction]
#[pyo3(signature = (backend, n=4, d=3, seed=0, step=1e-5))]
fn gradient_check(
    py: Python<'_>,
    backend: &str,
    n: usize,
    d: usize,
    seed: u64,
    step: f64,
) -> PyResult<(f64, bool)> {
    let mut cfg = core_cpcc::GradCheckConfig::new(self::backend(backend)?, n, d, seed);
    cfg.step = step;
    let r = py
        .detach(|| core_cpcc::gradient_check(&cfg))
        .map_err(to_py)?;
    Ok((r.max_rel_error, r.passed))
}

#[pymodule]
fn pyotcpcc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointSet>()?;
    m.add_class::<PyFlowPlan>()?;
    m.add_class::<PyLabelTree>()?;
    m.add_function(wrap_pyfunction!(emd, m)?)?;
    m.add_function(wrap_pyfunction!(emd_1d, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_flow_matching, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(cpcc, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add(
        "METHODS",
        Backend::ALL.iter().map(|b| b.name()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
