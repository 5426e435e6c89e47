//! Python bindings: operators, grids and tolerances as classes; checks return
//! plain dicts mirroring the JSON reports.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use fitzcheck::criteria::{self, NearConvexityOptions};
use fitzcheck::fitzpatrick;
use fitzcheck::harness::{self, RunOptions, ScenarioConfig};
use fitzcheck::operators::{self, ConvexSet};
use fitzcheck::{FiniteGraph, FunSpec, Grid, Matrix, OperatorSpec, PairPoint, ToleranceConfig, Vector};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(c: Vec<f64>) -> PyResult<Vector> {
    Vector::new(c).map_err(err)
}

fn pair(x: Vec<f64>, xstar: Vec<f64>) -> PyResult<PairPoint> {
    PairPoint::new(vector(x)?, vector(xstar)?).map_err(err)
}

fn graph(pairs: Vec<(Vec<f64>, Vec<f64>)>, tol: &ToleranceConfig) -> PyResult<FiniteGraph> {
    let pts = pairs.into_iter().map(|(x, y)| pair(x, y)).collect::<PyResult<Vec<_>>>()?;
    FiniteGraph::new(pts, tol).map_err(err)
}

/// Serializes through JSON so Python sees the same shape as the reports.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn tol_of(tol: Option<PyRef<'_, Tolerances>>) -> ToleranceConfig {
    tol.map(|t| t.inner).unwrap_or_default()
}

#[pyclass(name = "Tolerances", frozen)]
struct Tolerances {
    inner: ToleranceConfig,
}

#[pymethods]
impl Tolerances {
    #[new]
    #[pyo3(signature = (eq_tol=1e-9, inf_threshold=1e8, rank_tol=1e-8, budget=100_000))]
    fn new(eq_tol: f64, inf_threshold: f64, rank_tol: f64, budget: usize) -> PyResult<Self> {
        let inner = ToleranceConfig {
            eq_tol,
            inf_threshold,
            rank_tol,
            budget,
        };
        inner.validate().map_err(err)?;
        Ok(Tolerances { inner })
    }

    #[getter]
    fn eq_tol(&self) -> f64 {
        self.inner.eq_tol
    }

    #[getter]
    fn inf_threshold(&self) -> f64 {
        self.inner.inf_threshold
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>, spacing: f64) -> PyResult<Self> {
        let inner = Grid::new(vector(lower)?, vector(upper)?, spacing).map_err(err)?;
        Ok(PyGrid { inner })
    }

    #[staticmethod]
    fn cube(dim: usize, lo: f64, hi: f64, spacing: f64) -> PyResult<Self> {
        Ok(PyGrid {
            inner: Grid::cube(dim, lo, hi, spacing).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    fn nodes(&self) -> PyResult<Vec<Vec<f64>>> {
        let nodes = self.inner.nodes(ToleranceConfig::default().budget).map_err(err)?;
        Ok(nodes.into_iter().map(Vector::into_inner).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(lower={:?}, upper={:?}, spacing={})",
            self.inner.lower.as_slice(),
            self.inner.upper.as_slice(),
            self.inner.spacing
        )
    }
}

#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: OperatorSpec,
}

fn wrap(inner: OperatorSpec) -> PyOperator {
    PyOperator { inner }
}

#[pymethods]
impl PyOperator {
    /// Parses the same JSON layout used by `fitzcheck check --op`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: OperatorSpec = serde_json::from_str(text).map_err(err)?;
        if let Some(n) = spec.infer_dim() {
            spec.validate(n, &ToleranceConfig::default()).map_err(err)?;
        }
        Ok(wrap(spec))
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        wrap(OperatorSpec::identity(dim))
    }

    #[staticmethod]
    fn linear(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> PyResult<Self> {
        let m = Matrix::new(matrix).map_err(err)?;
        Ok(wrap(
            OperatorSpec::linear(m, vector(offset)?, &ToleranceConfig::default()).map_err(err)?,
        ))
    }

    #[staticmethod]
    fn normal_cone_box(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(wrap(OperatorSpec::normal_cone_box(vector(lo)?, vector(hi)?)))
    }

    #[staticmethod]
    fn normal_cone_polytope(vertices: Vec<Vec<f64>>) -> PyResult<Self> {
        let vertices = vertices.into_iter().map(vector).collect::<PyResult<Vec<_>>>()?;
        Ok(wrap(OperatorSpec::NormalCone {
            set: ConvexSet::Polytope { vertices },
        }))
    }

    /// Subdifferential of `scale/p * ||x - center||^p` (`center` defaults to 0).
    #[staticmethod]
    #[pyo3(signature = (p=2.0, scale=1.0, center=None))]
    fn subdiff_norm_power(p: f64, scale: f64, center: Option<Vec<f64>>) -> PyResult<Self> {
        let f = match center {
            None => FunSpec::NormPower { p, scale },
            Some(c) => FunSpec::TranslatedNormPower {
                p,
                scale,
                center: vector(c)?,
            },
        };
        Ok(wrap(OperatorSpec::subdiff(f)))
    }

    /// Subdifferential of `1/2 <x, Qx> + <b, x>` plus the indicator of `[lo, hi]`.
    #[staticmethod]
    #[pyo3(signature = (q, b, lo=None, hi=None))]
    fn subdiff_quadratic(q: Vec<Vec<f64>>, b: Vec<f64>, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>) -> PyResult<Self> {
        let quad = FunSpec::Quadratic {
            q: Matrix::new(q).map_err(err)?,
            b: vector(b)?,
        };
        let f = match (lo, hi) {
            (Some(lo), Some(hi)) => FunSpec::Sum {
                terms: vec![
                    quad,
                    FunSpec::BoxIndicator {
                        lo: vector(lo)?,
                        hi: vector(hi)?,
                    },
                ],
            },
            (None, None) => quad,
            _ => return Err(PyValueError::new_err("lo and hi must be given together")),
        };
        Ok(wrap(OperatorSpec::subdiff(f)))
    }

    #[staticmethod]
    fn duality_map(p: f64, center: Vec<f64>) -> PyResult<Self> {
        Ok(wrap(OperatorSpec::duality_map(p, vector(center)?)))
    }

    #[staticmethod]
    fn graph(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<Self> {
        Ok(wrap(OperatorSpec::graph(graph(pairs, &ToleranceConfig::default())?)))
    }

    /// Graph `gra A - (0, z*)`.
    fn shifted(&self, zstar: Vec<f64>) -> PyResult<Self> {
        Ok(wrap(operators::shift_operator(&self.inner, &vector(zstar)?)))
    }

    /// `A + lambda J_p(. - center)`.
    fn perturbed(&self, lam: f64, p: f64, center: Vec<f64>) -> PyResult<Self> {
        Ok(wrap(operators::perturb(&self.inner, lam, p, &vector(center)?).map_err(err)?))
    }

    /// Exact inverse when one is available in closed form.
    fn inverse(&self) -> Option<Self> {
        self.inner.inverse().map(wrap)
    }

    #[getter]
    fn dim(&self) -> Option<usize> {
        self.inner.infer_dim()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[pyo3(signature = (w, tol=None))]
    fn resolvent(&self, w: Vec<f64>, tol: Option<PyRef<'_, Tolerances>>) -> PyResult<Vec<f64>> {
        let x = operators::resolvent(&self.inner, &vector(w)?, &tol_of(tol)).map_err(err)?;
        Ok(x.into_inner())
    }

    #[pyo3(signature = (x, xstar, tol=None))]
    fn contains(&self, x: Vec<f64>, xstar: Vec<f64>, tol: Option<PyRef<'_, Tolerances>>) -> PyResult<bool> {
        Ok(operators::membership(&self.inner, &pair(x, xstar)?, &tol_of(tol)))
    }

    /// `A(x)` as `{"points": [...], "rays": [...], "exact": bool}`.
    #[pyo3(signature = (x, tol=None))]
    fn fiber<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        tol: Option<PyRef<'_, Tolerances>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f = operators::fiber(&self.inner, &vector(x)?, &tol_of(tol)).map_err(err)?;
        let as_lists = |vs: &[Vector]| vs.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>();
        to_py(
            py,
            &serde_json::json!({
                "points": as_lists(&f.points),
                "rays": as_lists(&f.rays),
                "exact": f.exact,
            }),
        )
    }

    /// `F_A(x, x*)`: exact for graphs and linear maps, sampled over `grid` otherwise.
    #[pyo3(signature = (x, xstar, grid=None, tol=None))]
    fn fitz<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        xstar: Vec<f64>,
        grid: Option<PyRef<'_, PyGrid>>,
        tol: Option<PyRef<'_, Tolerances>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let t = tol_of(tol);
        let pt = pair(x, xstar)?;
        let value = match (&self.inner, grid) {
            (OperatorSpec::Graph { graph }, _) => fitzcheck::FitzValue::Finite {
                value: fitzpatrick::fitz_finite(graph, &pt).map_err(err)?,
            },
            (OperatorSpec::Linear { matrix, offset }, _) => {
                fitzpatrick::fitz_linear(matrix, offset, &pt, &t).map_err(err)?
            }
            (_, Some(g)) => fitzpatrick::fitz_sampled(&self.inner, &pt, &g.inner, &t).map_err(err)?,
            (_, None) => return Err(PyValueError::new_err("sampled operators need a grid")),
        };
        to_py(py, &value)
    }

    fn __repr__(&self) -> String {
        format!("Operator({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

#[pyfunction]
fn fitz_finite(pairs: Vec<(Vec<f64>, Vec<f64>)>, x: Vec<f64>, xstar: Vec<f64>) -> PyResult<f64> {
    let g = graph(pairs, &ToleranceConfig::default())?;
    fitzpatrick::fitz_finite(&g, &pair(x, xstar)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (matrix, offset, x, xstar, tol=None))]
fn fitz_linear<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
    x: Vec<f64>,
    xstar: Vec<f64>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let m = Matrix::new(matrix).map_err(err)?;
    let v = fitzpatrick::fitz_linear(&m, &vector(offset)?, &pair(x, xstar)?, &tol_of(tol)).map_err(err)?;
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (op, points, grid, tol=None))]
fn fitz_inequality_check<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    points: Vec<(Vec<f64>, Vec<f64>)>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let t = tol_of(tol);
    let pts = points.into_iter().map(|(x, y)| pair(x, y)).collect::<PyResult<Vec<_>>>()?;
    let g = match &op.inner {
        OperatorSpec::Graph { graph } => graph.clone(),
        other => operators::graph_sample(other, &grid.inner, &t).map_err(err)?,
    };
    to_py(py, &fitzpatrick::fitz_inequality_check(&op.inner, &pts, &g, &t).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (pairs, z, zstar, tol=None))]
fn shift_identity_check<'py>(
    py: Python<'py>,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    z: Vec<f64>,
    zstar: Vec<f64>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let t = tol_of(tol);
    let g = graph(pairs, &t)?;
    to_py(py, &fitzpatrick::shift_identity_check(&g, &vector(z)?, &vector(zstar)?, &t).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (op, grid, tol=None))]
fn theorem36_experiment<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (_, cert) = criteria::theorem36_experiment(&op.inner, &grid.inner, &tol_of(tol)).map_err(err)?;
    to_py(py, &cert)
}

/// Returns `(estimate, certificate)`.
#[pyfunction]
#[pyo3(signature = (op, z, grid, tol=None))]
fn sup_quotient<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    z: Vec<f64>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<(f64, Bound<'py, PyAny>)> {
    let cert = criteria::sup_quotient_certificate(&op.inner, &vector(z)?, &grid.inner, &tol_of(tol)).map_err(err)?;
    let est = cert.get_scalar("estimate").unwrap_or(f64::NAN);
    Ok((est, to_py(py, &cert)?))
}

#[pyfunction]
#[pyo3(signature = (op, z, p, lambdas, grid, strict=false, tol=None))]
fn near_convexity_certificate<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    z: Vec<f64>,
    p: f64,
    lambdas: Vec<f64>,
    grid: PyRef<'_, PyGrid>,
    strict: bool,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = NearConvexityOptions {
        strict,
        ..Default::default()
    };
    let cert = criteria::near_convexity_certificate(&op.inner, &vector(z)?, p, &lambdas, &grid.inner, &opts, &tol_of(tol))
        .map_err(err)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (op, z, p, lambdas, grid, tol=None))]
fn conv_domain_certificate<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    z: Vec<f64>,
    p: f64,
    lambdas: Vec<f64>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cert = criteria::conv_domain_certificate(&op.inner, &vector(z)?, p, &lambdas, &grid.inner, &[], &tol_of(tol))
        .map_err(err)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (op, z, ns, grid, tol=None))]
fn blowup_witness_sequence<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    z: Vec<f64>,
    ns: Vec<u64>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (_, cert) =
        criteria::blowup_witness_sequence(&op.inner, &vector(z)?, &ns, &grid.inner, &tol_of(tol)).map_err(err)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (op, z, zstar, grid, tol=None))]
fn simons_lower_bound_check<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    z: Vec<f64>,
    zstar: Vec<f64>,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cert = criteria::simons_lower_bound_check(&op.inner, &pair(z, zstar)?, &grid.inner, &tol_of(tol)).map_err(err)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (op, x, xstar, alpha, beta, grid, tol=None))]
fn br_check<'py>(
    py: Python<'py>,
    op: PyRef<'_, PyOperator>,
    x: Vec<f64>,
    xstar: Vec<f64>,
    alpha: f64,
    beta: f64,
    grid: PyRef<'_, PyGrid>,
    tol: Option<PyRef<'_, Tolerances>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cert = criteria::br_check(&op.inner, &pair(x, xstar)?, alpha, beta, &grid.inner, &tol_of(tol)).map_err(err)?;
    to_py(py, &cert)
}

/// `None` for a monotone graph, otherwise the first violating pair of pairs.
#[pyfunction]
fn monotone_check(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<Option<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))>> {
    let t = ToleranceConfig::default();
    let g = graph(pairs, &t)?;
    let split = |p: PairPoint| (p.primal.into_inner(), p.dual.into_inner());
    Ok(operators::monotone_check(&g, &t).map(|(a, b)| (split(a), split(b))))
}

fn report<'py>(py: Python<'py>, cfg: &ScenarioConfig, parallel: bool) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &harness::run_suite(cfg, &RunOptions { parallel }))
}

/// Runs a scenario file and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (path, parallel=false))]
fn run_scenario<'py>(py: Python<'py>, path: PathBuf, parallel: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = harness::load_scenario(&path).map_err(err)?;
    report(py, &cfg, parallel)
}

/// Same as `run_scenario` for TOML given as a string.
#[pyfunction]
#[pyo3(signature = (text, parallel=false))]
fn run_scenario_str<'py>(py: Python<'py>, text: &str, parallel: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig::from_toml_str(text).map_err(err)?;
    report(py, &cfg, parallel)
}

#[pymodule]
fn pyfitzcheck(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tolerances>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(fitz_finite, m)?)?;
    m.add_function(wrap_pyfunction!(fitz_linear, m)?)?;
    m.add_function(wrap_pyfunction!(fitz_inequality_check, m)?)?;
    m.add_function(wrap_pyfunction!(shift_identity_check, m)?)?;
    m.add_function(wrap_pyfunction!(theorem36_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sup_quotient, m)?)?;
    m.add_function(wrap_pyfunction!(near_convexity_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(conv_domain_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_witness_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(simons_lower_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(br_check, m)?)?;
    m.add_function(wrap_pyfunction!(monotone_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_str, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
