//! Python bindings for `surjkit`.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use surjkit::certify::{self, BoxSpec, CertifyError, CertifyOptions, FamilyFunction};
use surjkit::dyadic::Dyadic;
use surjkit::factory::{self, EvalRequest, FunctionExpr};
use surjkit::phi::{self, VectorSpanMember, VectorTerm};
use surjkit::rank;

create_exception!(pysurjkit, SurjkitError, PyException);
create_exception!(pysurjkit, DegenerateError, SurjkitError);

fn err(e: impl std::fmt::Display) -> PyErr {
    SurjkitError::new_err(e.to_string())
}

fn certify_err(e: CertifyError) -> PyErr {
    match e {
        CertifyError::Degenerate(w) => DegenerateError::new_err((w.to_string(), w.coordinate)),
        other => err(other),
    }
}

/// A continuous map `R^m -> R^n` built from the curve and its lifts.
#[pyclass(name = "Expr", module = "pysurjkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExpr(Arc<FunctionExpr>);

#[pymethods]
impl PyExpr {
    #[getter]
    fn domain(&self) -> usize {
        self.0.domain()
    }

    #[getter]
    fn codomain(&self) -> usize {
        self.0.codomain()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    fn describe(&self) -> String {
        self.0.describe()
    }

    fn __repr__(&self) -> String {
        format!("Expr({}: R^{} -> R^{})", self.0.describe(), self.0.domain(), self.0.codomain())
    }

    /// Returns `(value, error_estimate)` at approximation depth `depth`.
    #[pyo3(signature = (point, depth = 12))]
    fn evaluate(&self, point: Vec<f64>, depth: u32) -> PyResult<(Vec<f64>, f64)> {
        let req = EvalRequest::from_f64(&point, depth).map_err(err)?;
        let ev = factory::evaluate(&self.0, &req).map_err(err)?;
        Ok((ev.value, ev.error_estimate))
    }

    /// Exact evaluation on dyadic strings such as `"3p-2"` or `"0.75"`.
    #[pyo3(signature = (point, depth = 12))]
    fn evaluate_exact(&self, point: Vec<String>, depth: u32) -> PyResult<Vec<String>> {
        let p: Vec<Dyadic> = point
            .iter()
            .map(|s| Dyadic::parse_exact_or_decimal(s).map_err(err))
            .collect::<PyResult<_>>()?;
        let v = factory::evaluate_exact(&self.0, &p, depth).map_err(err)?;
        Ok(v.iter().map(Dyadic::to_exact_string).collect())
    }

    /// Domain point whose image is within `eps` of `target`.
    fn preimage<'py>(&self, py: Python<'py>, target: Vec<f64>, eps: f64) -> PyResult<Bound<'py, PyDict>> {
        let w = factory::preimage(&self.0, &target, eps).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("point", w.point.iter().map(Dyadic::to_f64).collect::<Vec<_>>())?;
        d.set_item("exact", w.point.iter().map(Dyadic::to_exact_string).collect::<Vec<_>>())?;
        d.set_item("depth", w.depth)?;
        d.set_item("value", w.value)?;
        d.set_item("error", w.error)?;
        Ok(d)
    }
}

/// `Σ λ φ_r` acting coordinate-wise, `φ_r(t) = e^{rt} - e^{-rt}`.
#[pyclass(name = "SpanMember", module = "pysurjkit", frozen, from_py_object)]
#[derive(Clone)]
struct PySpanMember(VectorSpanMember);

#[pymethods]
impl PySpanMember {
    /// `terms` is a list of `(coefficient, exponents)` pairs.
    #[new]
    fn new(arity: usize, terms: Vec<(f64, Vec<f64>)>) -> PyResult<Self> {
        let terms = terms
            .into_iter()
            .map(|(coefficient, exponents)| VectorTerm { coefficient, exponents })
            .collect();
        VectorSpanMember::new(arity, terms).map(PySpanMember).map_err(err)
    }

    #[staticmethod]
    fn diagonal_family(exponents: Vec<f64>, n: usize) -> PyResult<Vec<PySpanMember>> {
        let fam = phi::make_diagonal_family(&exponents, n).map_err(err)?;
        Ok(fam.into_iter().map(PySpanMember).collect())
    }

    #[staticmethod]
    fn linear_combination(parts: Vec<(f64, PySpanMember)>) -> PyResult<Self> {
        let refs: Vec<(f64, &VectorSpanMember)> = parts.iter().map(|(c, m)| (*c, &m.0)).collect();
        VectorSpanMember::linear_combination(&refs).map(PySpanMember).map_err(err)
    }

    #[getter]
    fn arity(&self) -> usize {
        self.0.arity()
    }

    #[getter]
    fn terms(&self) -> Vec<(f64, Vec<f64>)> {
        self.0.terms().iter().map(|t| (t.coefficient, t.exponents.clone())).collect()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply(&x).map_err(err)
    }

    /// 1-based coordinate whose reduced span vanishes, or `None`.
    fn degenerate_coordinate(&self) -> Option<usize> {
        certify::detect_degenerate(&self.0).map(|w| w.coordinate)
    }

    fn __repr__(&self) -> String {
        format!("SpanMember(arity={}, terms={})", self.0.arity(), self.0.terms().len())
    }
}

#[pyfunction]
fn extend_to_line() -> PyExpr {
    PyExpr(factory::extend_to_line())
}

#[pyfunction]
fn identity(n: usize) -> PyResult<PyExpr> {
    factory::identity(n).map(PyExpr).map_err(err)
}

#[pyfunction]
fn lift_dimension(f: &PyExpr) -> PyResult<PyExpr> {
    factory::lift_dimension(&f.0).map(PyExpr).map_err(err)
}

#[pyfunction]
fn project_lift(g: &PyExpr, m: usize) -> PyResult<PyExpr> {
    factory::project_lift(&g.0, m).map(PyExpr).map_err(err)
}

#[pyfunction]
fn surjection(m: usize, n: usize) -> PyResult<PyExpr> {
    factory::surjection(m, n).map(PyExpr).map_err(err)
}

#[pyfunction]
fn phi_compose(member: &PySpanMember, inner: &PyExpr) -> PyResult<PyExpr> {
    factory::phi_compose(&member.0, &inner.0).map(PyExpr).map_err(err)
}

#[pyfunction]
fn phi_eval(r: f64, t: f64) -> PyResult<f64> {
    phi::phi_eval(r, t).map_err(err)
}

#[pyfunction]
fn phi_inverse(r: f64, y: f64) -> PyResult<f64> {
    phi::phi_inverse(r, y).map_err(err)
}

/// Depth-`k` curve cell centers in traversal order.
#[pyfunction]
#[pyo3(signature = (k, cap = 12))]
fn hilbert_trace(k: u32, cap: u32) -> PyResult<Vec<(f64, f64)>> {
    let pts = surjkit::curve::curve_trace(k, cap).map_err(err)?;
    Ok(pts.iter().map(|p| p.to_f64()).collect())
}

/// Returns `(rank, pivots)`.
#[pyfunction]
#[pyo3(signature = (rows, tol = rank::DEFAULT_RANK_TOL))]
fn numerical_rank(rows: Vec<Vec<f64>>, tol: f64) -> PyResult<(usize, Vec<f64>)> {
    let r = rank::numerical_rank(&rows, tol).map_err(err)?;
    Ok((r.rank, r.pivots))
}

/// Ranks of the family composed with `base`, and at the image points.
#[pyfunction]
#[pyo3(signature = (family, base, points, tol = rank::DEFAULT_RANK_TOL, depth = 12))]
fn composition_ranks(
    family: Vec<PySpanMember>,
    base: &PyExpr,
    points: Vec<Vec<f64>>,
    tol: f64,
    depth: u32,
) -> PyResult<(usize, usize)> {
    let fam: Vec<VectorSpanMember> = family.into_iter().map(|m| m.0).collect();
    let c = certify::composition_preserves_rank(&fam, &base.0, &points, tol, depth).map_err(certify_err)?;
    Ok((c.composed.rank, c.image.rank))
}

/// Rank of scalar `φ_r` functions sampled at `points`.
#[pyfunction]
#[pyo3(signature = (exponents, points, tol = rank::DEFAULT_RANK_TOL))]
fn scalar_family_rank(exponents: Vec<f64>, points: Vec<f64>, tol: f64) -> PyResult<usize> {
    let fam: Vec<FamilyFunction> = exponents
        .iter()
        .map(|&r| phi::ScalarSpan::basis(r).map(FamilyFunction::Scalar).map_err(err))
        .collect::<PyResult<_>>()?;
    let pts: Vec<Vec<f64>> = points.into_iter().map(|x| vec![x]).collect();
    let r = certify::independence_report(&fam, &pts, tol, 1).map_err(certify_err)?;
    Ok(r.rank)
}

/// Grid coverage certificate for `expr` on the box `bounds`.
#[pyfunction]
#[pyo3(signature = (expr, bounds, grid, eps, budget = None))]
fn certify_box<'py>(
    py: Python<'py>,
    expr: &PyExpr,
    bounds: Vec<(f64, f64)>,
    grid: usize,
    eps: f64,
    budget: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let b = BoxSpec::new(bounds, grid).map_err(certify_err)?;
    let mut opts = CertifyOptions::default();
    if let Some(budget) = budget {
        opts.budget = budget;
    }
    let expr = expr.0.clone();
    let cert = py
        .detach(move || certify::certify_with(&expr, &b, eps, opts))
        .map_err(certify_err)?;
    let d = PyDict::new(py);
    d.set_item("certified", cert.is_certified())?;
    d.set_item("targets", cert.records.len())?;
    d.set_item("hits", cert.hit_count())?;
    d.set_item("worst_error", cert.worst_error())?;
    d.set_item("max_depth", cert.max_depth())?;
    let witnesses: Vec<(Vec<f64>, Vec<String>, f64)> = cert
        .records
        .iter()
        .map(|r| (r.target.clone(), r.preimage.iter().map(Dyadic::to_exact_string).collect(), r.error))
        .collect();
    d.set_item("witnesses", witnesses)?;
    Ok(d)
}

#[pymodule]
fn pysurjkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PySpanMember>()?;
    m.add("SurjkitError", m.py().get_type::<SurjkitError>())?;
    m.add("DegenerateError", m.py().get_type::<DegenerateError>())?;
    m.add_function(wrap_pyfunction!(extend_to_line, m)?)?;
    m.add_function(wrap_pyfunction!(identity, m)?)?;
    m.add_function(wrap_pyfunction!(lift_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(project_lift, m)?)?;
    m.add_function(wrap_pyfunction!(surjection, m)?)?;
    m.add_function(wrap_pyfunction!(phi_compose, m)?)?;
    m.add_function(wrap_pyfunction!(phi_eval, m)?)?;
    m.add_function(wrap_pyfunction!(phi_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert_trace, m)?)?;
    m.add_function(wrap_pyfunction!(numerical_rank, m)?)?;
    m.add_function(wrap_pyfunction!(composition_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_family_rank, m)?)?;
    m.add_function(wrap_pyfunction!(certify_box, m)?)?;
    Ok(())
}
