//! Python bindings: meshes, presets, methods, solves, diagnostics and
//! convergence studies.

use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tiemortar::diagnostics;
use tiemortar::mesh::{build_rect_mesh, extract_trace_mesh, refine_uniform};
use tiemortar::saddle::{build_system, Discretization, DEFAULT_MAX_DOFS};
use tiemortar::study::{fit_rate as fit, run_study as study, StudyConfig};
use tiemortar::{Alpha, BoundaryTag, Error, MethodSpec, Mesh2D, Preset, Problem, SideTags, TraceMesh};

/// Invalid input becomes `ValueError`, solver failures `RuntimeError`.
pub fn to_py(e: Error) -> PyErr {
    match e.root() {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Incompressible(_)
        | Error::InvalidGeometry(_)
        | Error::EmptyInterface
        | Error::UnsupportedGeometry(_)
        | Error::TooLarge { .. }
        | Error::OffEdge { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn tag(s: &str) -> PyResult<BoundaryTag> {
    BoundaryTag::parse(&s.to_ascii_uppercase())
        .ok_or_else(|| PyValueError::new_err(format!("unknown boundary tag `{s}`")))
}

/// Triangle mesh with tagged boundary edges.
#[pyclass(name = "Mesh", module = "tiemortar_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMesh {
    pub inner: Mesh2D,
}

#[pymethods]
impl PyMesh {
    /// Structured mesh of a rectangle; `tags` are the (bottom, right, top,
    /// left) side tags, by default an interface on the right.
    #[staticmethod]
    #[pyo3(signature = (lower_left, upper_right, nx, ny, tags = None))]
    fn rect(
        lower_left: [f64; 2],
        upper_right: [f64; 2],
        nx: usize,
        ny: usize,
        tags: Option<(String, String, String, String)>,
    ) -> PyResult<Self> {
        let (b, r, t, l) = tags.unwrap_or_else(|| {
            ("neumann".into(), "interface".into(), "neumann".into(), "dirichlet".into())
        });
        let sides = SideTags {
            bottom: tag(&b)?,
            right: tag(&r)?,
            top: tag(&t)?,
            left: tag(&l)?,
        };
        let inner = build_rect_mesh(lower_left, upper_right, nx, ny, sides).map_err(to_py)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyMesh {
            inner: Mesh2D::from_text(text).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn refined(&self) -> Self {
        PyMesh {
            inner: refine_uniform(&self.inner),
        }
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.n_triangles()
    }

    /// `(n, 2)` array of vertex coordinates.
    #[getter]
    fn vertices<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        let flat: Vec<f64> = self.inner.vertices.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.inner.n_vertices(), 2), flat)
            .expect("shape")
            .into_pyarray(py)
    }

    /// `(m, 3)` array of counterclockwise vertex indices.
    #[getter]
    fn triangles<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<u64>> {
        let flat: Vec<u64> = self.inner.triangles.iter().flatten().map(|&v| v as u64).collect();
        Array2::from_shape_vec((self.inner.n_triangles(), 3), flat)
            .expect("shape")
            .into_pyarray(py)
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    /// Arc-length breakpoints of the interface partition.
    fn interface_breakpoints(&self) -> PyResult<Vec<f64>> {
        Ok(extract_trace_mesh(&self.inner).map_err(to_py)?.breakpoints)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh({} vertices, {} triangles, {} boundary edges)",
            self.inner.n_vertices(),
            self.inner.n_triangles(),
            self.inner.boundary.len()
        )
    }
}

/// Two bodies glued along a straight interface.
#[pyclass(name = "Problem", module = "tiemortar_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyProblem {
    pub inner: Problem,
}

#[pymethods]
impl PyProblem {
    /// `square-square` or `patch-test` at refinement `level`.
    #[staticmethod]
    #[pyo3(signature = (name, level = 0, matching = true))]
    fn preset(name: &str, level: usize, matching: bool) -> PyResult<Self> {
        let preset = Preset::parse(name).map_err(to_py)?;
        Ok(PyProblem {
            inner: preset.build(level, matching).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn mesh1(&self) -> PyMesh {
        PyMesh {
            inner: self.inner.mesh1.clone(),
        }
    }

    #[getter]
    fn mesh2(&self) -> PyMesh {
        PyMesh {
            inner: self.inner.mesh2.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.inner.name)
    }
}

/// Discretization choice, e.g. `Method("stab-p1p0")` or
/// `Method("stab-p1p1", alpha=1e-4)`.
#[pyclass(name = "Method", module = "tiemortar_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMethod {
    pub inner: MethodSpec,
}

#[pymethods]
impl PyMethod {
    #[new]
    #[pyo3(signature = (name, alpha = None))]
    fn new(name: &str, alpha: Option<f64>) -> PyResult<Self> {
        let mut inner = MethodSpec::parse(name).map_err(to_py)?;
        if let Some(a) = alpha {
            if !inner.is_stabilized() {
                return Err(PyValueError::new_err(format!("{name} is not stabilized; alpha does not apply")));
            }
            inner = inner.with_alpha(Alpha::Fixed(a));
            inner.validate().map_err(to_py)?;
        }
        Ok(PyMethod { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.to_string()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn multiplier(&self) -> String {
        format!("{:?}", self.inner.multiplier)
    }

    #[getter]
    fn stabilized(&self) -> bool {
        self.inner.is_stabilized()
    }

    fn __repr__(&self) -> String {
        format!("Method({})", self.inner)
    }
}

/// Result of a solve; displacements over all dofs, interleaved `(x, y)`.
#[pyclass(name = "Solution", module = "tiemortar_py", frozen)]
pub struct PySolution {
    u1: Vec<f64>,
    u2: Vec<f64>,
    lambda: Vec<f64>,
    profile: Vec<(f64, f64, f64)>,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    alpha: Option<f64>,
    #[pyo3(get)]
    dofs: usize,
    #[pyo3(get)]
    method: String,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn u1<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        PyArray1::from_slice(py, &self.u1)
    }

    #[getter]
    fn u2<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        PyArray1::from_slice(py, &self.u2)
    }

    #[getter]
    fn multiplier<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        PyArray1::from_slice(py, &self.lambda)
    }

    /// `(s, lambda_n, lambda_t)` arrays at the profile samples.
    #[allow(clippy::type_complexity)]
    fn profile<'py>(
        &self,
        py: Python<'py>,
    ) -> (Bound<'py, PyArray1<f64>>, Bound<'py, PyArray1<f64>>, Bound<'py, PyArray1<f64>>) {
        let s: Vec<f64> = self.profile.iter().map(|p| p.0).collect();
        let n: Vec<f64> = self.profile.iter().map(|p| p.1).collect();
        let t: Vec<f64> = self.profile.iter().map(|p| p.2).collect();
        (s.into_pyarray(py), n.into_pyarray(py), t.into_pyarray(py))
    }

    fn __repr__(&self) -> String {
        format!("Solution({}, {} dofs, residual {:.2e})", self.method, self.dofs, self.residual)
    }
}

#[pyfunction(name = "solve")]
fn py_solve(py: Python<'_>, problem: &PyProblem, method: &PyMethod) -> PyResult<PySolution> {
    let (p, m) = (problem.inner.clone(), method.inner);
    py.detach(move || {
        let sys = build_system(&p, &m)?;
        let sol = tiemortar::solve(&sys)?;
        Ok(PySolution {
            profile: sys.disc.space.profile(&sol.lambda),
            u1: sol.u1,
            u2: sol.u2,
            lambda: sol.lambda,
            residual: sol.residual,
            alpha: sys.alpha,
            dofs: sys.dim(),
            method: m.to_string(),
        })
    })
    .map_err(to_py)
}

/// Assembled system as a dict of coordinate arrays `rows, cols, values`,
/// the right-hand side `rhs` and the block `offsets`.
#[pyfunction]
fn assemble<'py>(py: Python<'py>, problem: &PyProblem, method: &PyMethod) -> PyResult<Bound<'py, PyDict>> {
    let sys = build_system(&problem.inner, &method.inner).map_err(to_py)?;
    let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (i, j, x) in sys.matrix.iter() {
        r.push(i as u64);
        c.push(j as u64);
        v.push(x);
    }
    let d = PyDict::new(py);
    d.set_item("rows", r.into_pyarray(py))?;
    d.set_item("cols", c.into_pyarray(py))?;
    d.set_item("values", v.into_pyarray(py))?;
    d.set_item("rhs", PyArray1::from_slice(py, &sys.rhs))?;
    d.set_item("offsets", sys.offsets())?;
    d.set_item("alpha", sys.alpha)?;
    Ok(d)
}

/// Discrete trace constant `C_I` of the side-1 mesh.
#[pyfunction]
#[pyo3(signature = (mesh, young = 1e3, poisson = 0.3, degree = 1))]
fn trace_constant(mesh: &PyMesh, young: f64, poisson: f64, degree: usize) -> PyResult<f64> {
    let material = tiemortar::ElasticMaterial::new(young, poisson).map_err(to_py)?;
    Ok(diagnostics::estimate_trace_constant(&mesh.inner, &material, degree)
        .map_err(to_py)?
        .value)
}

#[pyfunction]
fn extension_constant(mesh: &PyMesh) -> PyResult<f64> {
    Ok(diagnostics::extension_constant(&mesh.inner).map_err(to_py)?.value)
}

#[pyfunction]
fn projection_stability(breakpoints: Vec<f64>) -> PyResult<f64> {
    let trace = TraceMesh::from_breakpoints(breakpoints).map_err(to_py)?;
    Ok(diagnostics::projection_stability(&trace).map_err(to_py)?.value)
}

/// `β_h` of the element pair (`p1p1`, `p1p0`, `p1p1d`, `p2p1`).
#[pyfunction]
#[pyo3(signature = (problem, pair = "p1p1"))]
fn infsup(problem: &PyProblem, pair: &str) -> PyResult<f64> {
    let m = MethodSpec::parse(&format!("mixed-{pair}")).map_err(to_py)?;
    let disc = Discretization::new(&problem.inner, m.degree, m.multiplier, DEFAULT_MAX_DOFS).map_err(to_py)?;
    Ok(diagnostics::infsup_mesh_norm(&disc).map_err(to_py)?.value)
}

/// Least-squares slope of `log(err)` against `log(h)`.
#[pyfunction]
fn fit_rate(h: Vec<f64>, err: Vec<f64>) -> PyResult<f64> {
    if h.len() != err.len() {
        return Err(PyValueError::new_err("h and err differ in length"));
    }
    let pts: Vec<(f64, f64)> = h.into_iter().zip(err).collect();
    fit(&pts).map_err(to_py)
}

/// Convergence study; returns `rows`, `rates`, `reference_dofs` and the
/// `convergence_csv` text, and writes artifacts when `output_dir` is set.
#[pyfunction]
#[pyo3(signature = (
    methods,
    preset = "square-square",
    matching = true,
    levels = 5,
    reference_extra = 2,
    output_dir = None,
    infsup = true,
    threads = 1,
))]
#[allow(clippy::too_many_arguments)]
fn run_study<'py>(
    py: Python<'py>,
    methods: Vec<String>,
    preset: &str,
    matching: bool,
    levels: usize,
    reference_extra: usize,
    output_dir: Option<std::path::PathBuf>,
    infsup: bool,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let methods = methods
        .iter()
        .map(|m| MethodSpec::parse(m))
        .collect::<tiemortar::Result<Vec<_>>>()
        .map_err(to_py)?;
    let mut cfg = StudyConfig::new(Preset::parse(preset).map_err(to_py)?, matching, methods);
    cfg.levels = levels;
    cfg.reference_extra = reference_extra;
    cfg.output_dir = output_dir;
    cfg.infsup = infsup;
    cfg.threads = threads;
    let report = py.detach(|| study(&cfg)).map_err(to_py)?;
    let rows = PyList::empty(py);
    for r in &report.rows {
        let d = PyDict::new(py);
        d.set_item("method", &r.method)?;
        d.set_item("level", r.level)?;
        d.set_item("h", r.h)?;
        d.set_item("dofs", r.dofs)?;
        d.set_item("err_lambda", r.err_lambda)?;
        d.set_item("err_energy", r.err_energy)?;
        d.set_item("uniformity", r.uniformity)?;
        d.set_item("beta_h", r.beta_h)?;
        d.set_item("alpha", r.alpha)?;
        d.set_item("oscillation", r.oscillation)?;
        rows.append(d)?;
    }
    let rates = PyDict::new(py);
    for r in &report.rates {
        rates.set_item(&r.method, (r.slope_lambda, r.slope_energy))?;
    }
    let out = PyDict::new(py);
    out.set_item("rows", rows)?;
    out.set_item("rates", rates)?;
    out.set_item("reference_dofs", report.reference_dofs)?;
    out.set_item("convergence_csv", report.convergence_csv())?;
    Ok(out)
}

#[pymodule]
pub fn tiemortar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyMethod>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(py_solve, m)?)?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(trace_constant, m)?)?;
    m.add_function(wrap_pyfunction!(extension_constant, m)?)?;
    m.add_function(wrap_pyfunction!(projection_stability, m)?)?;
    m.add_function(wrap_pyfunction!(infsup, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
