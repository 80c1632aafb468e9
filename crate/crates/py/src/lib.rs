//! Python bindings: boundaries, sample frames, pooled and curve estimation,
//! bandwidth selection, and the simulation harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bdd::curve::{self, CurveMethod, GridSpec, Weighting};
use bdd::data::Dataset;
use bdd::dgp::DgpSpec;
use bdd::error::Error;
use bdd::frame::SampleFrame;
use bdd::geometry::{parse_boundary, Boundary as CoreBoundary, Point, Region, SegmentPartition, Side};
use bdd::pooled::{self, PooledSpec};
use bdd::regress::KernelKind;

fn to_py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_kernel(name: &str) -> PyResult<KernelKind> {
    match name {
        "uniform" => Ok(KernelKind::Uniform),
        "triangular" => Ok(KernelKind::Triangular),
        "epanechnikov" => Ok(KernelKind::Epanechnikov),
        other => Err(PyValueError::new_err(format!("unknown kernel `{other}`"))),
    }
}

fn parse_method(name: &str) -> PyResult<CurveMethod> {
    match name {
        "distance" => Ok(CurveMethod::Distance),
        "location" => Ok(CurveMethod::Location),
        other => Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
}

/// Oriented piecewise-linear assignment boundary.
#[pyclass(name = "Boundary")]
struct PyBoundary {
    inner: CoreBoundary,
    partition: Option<SegmentPartition>,
}

#[pymethods]
impl PyBoundary {
    /// Build from a vertex list; `treated_side` is "left" or "right" of the
    /// direction of travel.
    #[new]
    #[pyo3(signature = (vertices, closed=false, treated_side="left"))]
    fn new(vertices: Vec<(f64, f64)>, closed: bool, treated_side: &str) -> PyResult<Self> {
        let side = match treated_side {
            "left" => Side::Left,
            "right" => Side::Right,
            other => return Err(PyValueError::new_err(format!("treated_side must be left|right, got {other}"))),
        };
        let pts = vertices.into_iter().map(|(a, b)| Point::new(a, b)).collect();
        let inner = CoreBoundary::new(pts, closed, side).map_err(|e| to_py_err(e.into()))?;
        Ok(PyBoundary { inner, partition: None })
    }

    /// Parse the text format used by the CLI.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let (inner, partition) = parse_boundary(text).map_err(|e| to_py_err(e.into()))?;
        Ok(PyBoundary { inner, partition })
    }

    fn total_length(&self) -> f64 {
        self.inner.total_length()
    }

    fn signed_distance(&self, x1: f64, x2: f64) -> f64 {
        self.inner.signed_distance(Point::new(x1, x2))
    }

    fn is_treated(&self, x1: f64, x2: f64) -> bool {
        self.inner.region_of(Point::new(x1, x2)) == Region::A1
    }

    fn closest_point(&self, x1: f64, x2: f64) -> (f64, f64, f64) {
        let p = self.inner.closest_point(Point::new(x1, x2));
        (p.point.x1, p.point.x2, p.distance)
    }

    /// Evenly spaced points along the boundary.
    fn discretize(&self, j: usize) -> PyResult<Vec<(f64, f64)>> {
        let pts = self.inner.discretize(j).map_err(|e| to_py_err(e.into()))?;
        Ok(pts.into_iter().map(|p| (p.x1, p.x2)).collect())
    }
}

/// Estimation sample with derived distance, treatment, and segment columns.
#[pyclass(name = "Frame")]
struct PyFrame {
    inner: SampleFrame,
}

#[pymethods]
impl PyFrame {
    /// Derive D, T, S for `(y, x1, x2)` rows. `segments` splits the
    /// boundary into equal-arclength pieces; a partition in the boundary
    /// file wins if present.
    #[new]
    #[pyo3(signature = (y, x1, x2, boundary, segments=None))]
    fn new(
        y: Vec<f64>,
        x1: Vec<f64>,
        x2: Vec<f64>,
        boundary: &PyBoundary,
        segments: Option<usize>,
    ) -> PyResult<Self> {
        if y.len() != x1.len() || y.len() != x2.len() {
            return Err(PyValueError::new_err("y, x1, x2 must have equal length"));
        }
        let ds = Dataset {
            y,
            x: x1.into_iter().zip(x2).map(|(a, b)| Point::new(a, b)).collect(),
        };
        let owned;
        let partition = match (&boundary.partition, segments) {
            (Some(p), None) => Some(p),
            (_, Some(l)) => {
                owned = SegmentPartition::uniform(&boundary.inner, l).map_err(|e| to_py_err(e.into()))?;
                Some(&owned)
            }
            (None, None) => None,
        };
        let inner = SampleFrame::derive(&ds, &boundary.inner, partition).map_err(to_py_err)?;
        Ok(PyFrame { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.inner.d.clone()
    }

    #[getter]
    fn t(&self) -> Vec<bool> {
        self.inner.t.clone()
    }

    #[getter]
    fn s(&self) -> Vec<usize> {
        self.inner.s.clone()
    }
}

/// Pooled estimation (specifications 1..8) with optional robust bias
/// correction. Returns a dict mirroring the CLI's JSON output.
#[pyfunction]
#[pyo3(signature = (frame, spec, p=1, q=None, kernel="triangular", h=None, alpha=0.05))]
#[allow(clippy::too_many_arguments)]
fn estimate_pooled(
    py: Python<'_>,
    frame: &PyFrame,
    spec: u8,
    p: usize,
    q: Option<usize>,
    kernel: &str,
    h: Option<f64>,
    alpha: f64,
) -> PyResult<Py<PyDict>> {
    let kernel = parse_kernel(kernel)?;
    let l = frame.inner.n_segments();
    let h = match h {
        Some(v) => v,
        None => {
            let proxy_p = if spec <= 3 { p.max(1) } else { p };
            bdd::bandwidth::h_mse_pooled(&frame.inner, proxy_p, kernel, None)
                .map_err(to_py_err)?
                .h
        }
    };
    let spec = PooledSpec::new(spec, p, l, kernel, h).map_err(to_py_err)?;
    let est = match q {
        Some(q) => pooled::estimate_rbc(&spec, &frame.inner, q, alpha).map_err(to_py_err)?,
        None => pooled::estimate(&spec, &frame.inner, alpha).map_err(to_py_err)?,
    };
    let out = PyDict::new(py);
    out.set_item("tau_hat", &est.tau_hat)?;
    out.set_item("se", &est.se)?;
    out.set_item("ci_conventional", &est.ci_conventional)?;
    out.set_item("tau_rbc", &est.tau_rbc)?;
    out.set_item("ci_rbc", &est.ci_rbc)?;
    out.set_item("n_treated", est.n_treated)?;
    out.set_item("n_control", est.n_control)?;
    out.set_item("h_used", est.h_used)?;
    Ok(out.into())
}

/// Boundary-point effect curve with robust bias correction, sup-t band, and
/// aggregates. Returns a dict of per-point lists plus scalars.
#[pyfunction]
#[pyo3(signature = (frame, boundary, method="location", grid=40, p=1, q=2, kernel="triangular", h=None, alpha=0.05, seed=20250801, band_draws=10_000))]
#[allow(clippy::too_many_arguments)]
fn estimate_curve(
    py: Python<'_>,
    frame: &PyFrame,
    boundary: &PyBoundary,
    method: &str,
    grid: usize,
    p: usize,
    q: usize,
    kernel: &str,
    h: Option<f64>,
    alpha: f64,
    seed: u64,
    band_draws: usize,
) -> PyResult<Py<PyDict>> {
    let kernel = parse_kernel(kernel)?;
    let method = parse_method(method)?;
    let grid = GridSpec::new(&boundary.inner, grid).map_err(to_py_err)?;
    let h = match h {
        Some(v) => v,
        None => bdd::bandwidth::h_mse_integrated(&frame.inner, &boundary.inner, &grid.points, p, kernel)
            .map_err(to_py_err)?
            .h,
    };
    let curve = curve::estimate_curve_rbc(
        method,
        &frame.inner,
        &grid,
        p,
        q,
        kernel,
        h,
        alpha,
        band_draws,
        seed,
    )
    .map_err(to_py_err)?;
    let agg = curve::aggregate(&curve, &boundary.inner, &Weighting::Density { frame: &frame.inner, h }).ok();

    let out = PyDict::new(py);
    out.set_item("arclength", curve.points.iter().map(|pt| pt.arclength).collect::<Vec<_>>())?;
    out.set_item(
        "location",
        curve.points.iter().map(|pt| (pt.location.x1, pt.location.x2)).collect::<Vec<_>>(),
    )?;
    out.set_item("tau_hat", curve.points.iter().map(|pt| pt.tau).collect::<Vec<_>>())?;
    out.set_item("tau_rbc", curve.points.iter().map(|pt| pt.tau_rbc).collect::<Vec<_>>())?;
    out.set_item("se", curve.points.iter().map(|pt| pt.se).collect::<Vec<_>>())?;
    out.set_item("ci", curve.points.iter().map(|pt| pt.ci).collect::<Vec<_>>())?;
    out.set_item("band", curve.points.iter().map(|pt| pt.band).collect::<Vec<_>>())?;
    out.set_item("band_crit", curve.band_crit)?;
    out.set_item("h_used", h)?;
    out.set_item("n_gaps", curve.n_gaps)?;
    if let Some(a) = agg {
        out.set_item("wbate", a.wbate)?;
        out.set_item("wbate_se", a.wbate_se)?;
        out.set_item("lbate", a.lbate)?;
        out.set_item("lbate_point", (a.lbate_point.x1, a.lbate_point.x2))?;
    }
    Ok(out.into())
}

/// Plug-in MSE-optimal bandwidth for pooled estimation.
#[pyfunction]
#[pyo3(signature = (frame, p=1, kernel="triangular"))]
fn h_mse_pooled(frame: &PyFrame, p: usize, kernel: &str) -> PyResult<f64> {
    let kernel = parse_kernel(kernel)?;
    Ok(bdd::bandwidth::h_mse_pooled(&frame.inner, p, kernel, None)
        .map_err(to_py_err)?
        .h)
}

type SimulateOut = (Vec<f64>, Vec<f64>, Vec<f64>, Py<PyDict>);

/// Simulate a DGP spec (the CLI's flat key = value text). Returns
/// `(y, x1, x2, truth)` where truth holds the quadrature values.
#[pyfunction]
fn simulate(py: Python<'_>, dgp_text: &str) -> PyResult<SimulateOut> {
    let spec = DgpSpec::parse(dgp_text).map_err(to_py_err)?;
    let (ds, truth) = spec.simulate();
    let t = PyDict::new(py);
    t.set_item("bate", truth.bate)?;
    t.set_item("lbate", truth.lbate)?;
    t.set_item("lbate_arclength", truth.lbate_arclength)?;
    t.set_item("quad_error", truth.quad_error)?;
    let x1 = ds.x.iter().map(|p| p.x1).collect();
    let x2 = ds.x.iter().map(|p| p.x2).collect();
    Ok((ds.y, x1, x2, t.into()))
}

#[pymodule]
fn bdd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBoundary>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(estimate_pooled, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(h_mse_pooled, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
