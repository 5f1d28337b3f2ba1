//! Python bindings. Matrices cross the boundary as nested lists (row major);
//! complex values use Python `complex`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use interpmor::cli::{self, Command, JobSpec};
use interpmor::interp::{self, BasisMode, TangentData};
use interpmor::io::{self, Model};
use interpmor::{coprime, dae, h2, loewner, models, parametric, weighted};
use interpmor::{CMat, CVec, MorError, RMat, TransferFunction};

fn py_err(e: MorError) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(format!("{}: {e}", e.kind()))
    } else {
        PyRuntimeError::new_err(format!("{}: {e}", e.kind()))
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<RMat, MorError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(MorError::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(RMat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn cmatrix_to_rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn dirs(v: Vec<Vec<Complex64>>) -> Vec<CVec> {
    v.into_iter().map(CVec::from_vec).collect()
}

#[pyclass(name = "DescriptorSystem", from_py_object)]
#[derive(Clone)]
struct PyDescriptor {
    inner: interpmor::DescriptorSystem,
}

#[pymethods]
impl PyDescriptor {
    #[new]
    #[pyo3(signature = (a, b, c, e=None, d=None))]
    fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        e: Option<Vec<Vec<f64>>>,
        d: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let a = rows_to_matrix(&a).map_err(py_err)?;
        let b = rows_to_matrix(&b).map_err(py_err)?;
        let c = rows_to_matrix(&c).map_err(py_err)?;
        let n = a.nrows();
        let e = match e {
            Some(e) => rows_to_matrix(&e).map_err(py_err)?,
            None => RMat::identity(n, n),
        };
        let d = match d {
            Some(d) => rows_to_matrix(&d).map_err(py_err)?,
            None => RMat::zeros(c.nrows(), b.ncols()),
        };
        let inner = interpmor::DescriptorSystem::new(e, a, b, c, d).map_err(py_err)?;
        Ok(PyDescriptor { inner })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }
    #[getter]
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }
    #[getter]
    fn outputs(&self) -> usize {
        self.inner.outputs()
    }

    /// `(E, A, B, C, D)` as nested lists.
    #[allow(clippy::type_complexity)]
    fn matrices(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let s = &self.inner;
        (matrix_to_rows(s.e()), matrix_to_rows(s.a()), matrix_to_rows(s.b()), matrix_to_rows(s.c()), matrix_to_rows(s.d()))
    }

    fn transfer(&self, s: Complex64) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(cmatrix_to_rows(&self.inner.transfer(s).map_err(py_err)?))
    }

    #[pyo3(signature = (s, k=1))]
    fn derivative(&self, s: Complex64, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(cmatrix_to_rows(&self.inner.transfer_kth_derivative(s, k).map_err(py_err)?))
    }

    fn poles(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.pencil_spectrum().map_err(py_err)?.finite)
    }

    fn h2_norm(&self) -> PyResult<f64> {
        self.inner.h2_norm().map_err(py_err)
    }

    fn hinf_norm(&self) -> PyResult<f64> {
        self.inner.hinf_norm().map_err(py_err)
    }

    fn error_system(&self, other: &PyDescriptor) -> PyResult<PyDescriptor> {
        Ok(PyDescriptor { inner: self.inner.error_system(&other.inner).map_err(py_err)? })
    }

    /// Polynomial-part coefficients `[P_0, P_1, ...]` of the additive split.
    fn polynomial_part(&self) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let d = dae::additive_decomposition(&self.inner).map_err(py_err)?;
        Ok(d.poly.iter().map(matrix_to_rows).collect())
    }

    fn save(&self, directory: PathBuf, stem: &str) -> PyResult<String> {
        let p = io::write_model(&directory, stem, &Model::Descriptor(self.inner.clone())).map_err(py_err)?;
        Ok(p.display().to_string())
    }

    fn __repr__(&self) -> String {
        format!("DescriptorSystem(n={}, m={}, p={})", self.inner.order(), self.inner.inputs(), self.inner.outputs())
    }
}

#[pyclass(name = "CoprimeSystem", from_py_object)]
#[derive(Clone)]
struct PyCoprime {
    inner: coprime::CoprimeSystem,
}

#[pymethods]
impl PyCoprime {
    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }
    fn transfer(&self, s: Complex64) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(cmatrix_to_rows(&self.inner.eval(s).map_err(py_err)?))
    }
    #[pyo3(signature = (s, k=1))]
    fn derivative(&self, s: Complex64, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(cmatrix_to_rows(&self.inner.eval_derivative(s, k).map_err(py_err)?))
    }
    /// Second-order Padé replacement of the delay.
    fn pade2(&self) -> PyResult<PyCoprime> {
        Ok(PyCoprime { inner: coprime::pade2_delay_baseline(&self.inner).map_err(py_err)? })
    }
    fn __repr__(&self) -> String {
        format!("CoprimeSystem(n={})", self.inner.order())
    }
}

#[pyclass(name = "ParametricSystem", from_py_object)]
#[derive(Clone)]
struct PyParametric {
    inner: parametric::ParametricCoprimeSystem,
}

#[pymethods]
impl PyParametric {
    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }
    #[getter]
    fn nparams(&self) -> usize {
        self.inner.nparams()
    }

    /// `(H, dH/ds, [dH/dp_j])` at `(s, p)`.
    #[allow(clippy::type_complexity)]
    fn eval(
        &self,
        s: Complex64,
        p: Vec<f64>,
    ) -> PyResult<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, Vec<Vec<Vec<Complex64>>>)> {
        let ev = parametric::param_eval(&self.inner, s, &p).map_err(py_err)?;
        Ok((cmatrix_to_rows(&ev.value), cmatrix_to_rows(&ev.derivative), ev.gradient.iter().map(cmatrix_to_rows).collect()))
    }

    /// Reduce with one bitangential condition per `(s, p)` pair.
    fn reduce(&self, points: Vec<(Complex64, Vec<f64>)>) -> PyResult<PyParametric> {
        let (m, q) = (self.inner.inputs(), self.inner.outputs());
        let pts = points
            .into_iter()
            .map(|(s, p)| {
                let tangent = TangentData::bitangential(
                    vec![s],
                    vec![CVec::from_element(m, Complex64::new(1.0, 0.0))],
                    vec![CVec::from_element(q, Complex64::new(1.0, 0.0))],
                )?;
                Ok(parametric::ParamPoint { parameter: p, tangent })
            })
            .collect::<Result<Vec<_>, MorError>>()
            .map_err(py_err)?;
        let bases =
            parametric::multipoint_bases(&self.inner, &parametric::ParamTangentData::new(pts)).map_err(py_err)?;
        let inner = parametric::param_reduce(&self.inner, &bases.v, &bases.w).map_err(py_err)?;
        Ok(PyParametric { inner })
    }

    fn __repr__(&self) -> String {
        format!("ParametricSystem(n={}, nparams={})", self.inner.order(), self.inner.nparams())
    }
}

/// Load a model manifest; returns the matching system class.
#[pyfunction]
fn load_model(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    Ok(match io::read_model(&path).map_err(py_err)? {
        Model::Descriptor(inner) => Py::new(py, PyDescriptor { inner })?.into_any(),
        Model::Coprime(inner) => Py::new(py, PyCoprime { inner })?.into_any(),
        Model::Parametric(inner) => Py::new(py, PyParametric { inner })?.into_any(),
    })
}

#[pyfunction]
fn three_state_example() -> PyDescriptor {
    PyDescriptor { inner: models::three_state_example() }
}

#[pyfunction]
fn random_stable(seed: u64, n: usize, m: usize, p: usize) -> PyDescriptor {
    PyDescriptor { inner: models::random_stable(seed, n, m, p) }
}

#[pyfunction]
fn mass_spring() -> PyParametric {
    PyParametric { inner: models::mass_spring() }
}

#[pyfunction]
#[pyo3(signature = (n=100, kappa=3.0, tau=0.1))]
fn delay_family(n: usize, kappa: f64, tau: f64) -> PyCoprime {
    PyCoprime { inner: models::delay_family(n, kappa, tau) }
}

/// Tangential interpolatory reduction with bitangential conditions at `points`.
#[pyfunction]
#[pyo3(signature = (sys, points, right, left, orthonormal=true))]
fn interpolatory_reduce(
    sys: &PyDescriptor,
    points: Vec<Complex64>,
    right: Vec<Vec<Complex64>>,
    left: Vec<Vec<Complex64>>,
    orthonormal: bool,
) -> PyResult<PyDescriptor> {
    let data = TangentData::bitangential(points, dirs(right), dirs(left)).map_err(py_err)?;
    let mode = if orthonormal { BasisMode::Orthonormal } else { BasisMode::Raw };
    Ok(PyDescriptor { inner: interp::interpolatory_reduce(&sys.inner, &data, mode).map_err(py_err)? })
}

/// Polynomial-part preserving reduction of a descriptor system with singular `E`.
#[pyfunction]
fn dae_reduce(
    sys: &PyDescriptor,
    points: Vec<Complex64>,
    right: Vec<Vec<Complex64>>,
    left: Vec<Vec<Complex64>>,
) -> PyResult<PyDescriptor> {
    let data = TangentData::bitangential(points, dirs(right), dirs(left)).map_err(py_err)?;
    Ok(PyDescriptor { inner: dae::dae_reduce(&sys.inner, &data).map_err(py_err)?.reduced })
}

fn irka_dict<'py>(
    py: Python<'py>,
    reduced: interpmor::DescriptorSystem,
    converged: bool,
    iterations: usize,
    optimality: f64,
    poles: Vec<Complex64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("reduced", Py::new(py, PyDescriptor { inner: reduced })?)?;
    d.set_item("converged", converged)?;
    d.set_item("iterations", iterations)?;
    d.set_item("optimality", optimality)?;
    d.set_item("poles", poles)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (sys, order, max_iters=200, tol=1e-10, seed=0))]
fn irka<'py>(
    py: Python<'py>,
    sys: &PyDescriptor,
    order: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = h2::IrkaConfig::new(order);
    cfg.max_iters = max_iters;
    cfg.shift_tol = tol;
    cfg.seed = seed;
    let r = h2::irka(&sys.inner, &cfg).map_err(py_err)?;
    irka_dict(py, r.reduced, r.converged, r.history.len(), r.optimality.max_residual, r.pole_residue.poles)
}

/// TF-IRKA using only transfer-function samples of `sys` (descriptor or coprime).
#[pyfunction]
#[pyo3(signature = (sys, order, max_iters=200, tol=1e-10, seed=0))]
fn tf_irka<'py>(
    py: Python<'py>,
    sys: &Bound<'py, PyAny>,
    order: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = h2::IrkaConfig::new(order);
    cfg.max_iters = max_iters;
    cfg.shift_tol = tol;
    cfg.seed = seed;
    let r = if let Ok(d) = sys.extract::<PyDescriptor>() {
        loewner::tf_irka(&d.inner, &cfg)
    } else if let Ok(c) = sys.extract::<PyCoprime>() {
        loewner::tf_irka(&c.inner, &cfg)
    } else {
        return Err(PyValueError::new_err("tf_irka needs a DescriptorSystem or CoprimeSystem"));
    }
    .map_err(py_err)?;
    let reduced = r.reduced.ok_or_else(|| py_err(MorError::NotConjugateClosed))?;
    irka_dict(py, reduced, r.converged, r.history.len(), r.optimality.max_residual, r.pole_residue.poles)
}

/// `‖H − H_r‖_H2`, optionally input-weighted by a state-space `weight`.
#[pyfunction]
#[pyo3(signature = (full, reduced, weight=None))]
fn h2_error(full: &PyDescriptor, reduced: &PyDescriptor, weight: Option<&PyDescriptor>) -> PyResult<f64> {
    match weight {
        Some(w) => {
            let w = weighted::WeightSystem::from_descriptor(&w.inner).map_err(py_err)?;
            weighted::weighted_h2_norm(&full.inner, &reduced.inner, &w).map_err(py_err)
        }
        None => full.inner.error_system(&reduced.inner).and_then(|e| e.h2_norm()).map_err(py_err),
    }
}

/// Run a CLI job; returns the exit code.
#[pyfunction]
#[pyo3(signature = (command, out, systems=Vec::new(), tangent=None, reduced=None, order=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_job(
    command: &str,
    out: PathBuf,
    systems: Vec<PathBuf>,
    tangent: Option<PathBuf>,
    reduced: Option<PathBuf>,
    order: Option<usize>,
    seed: u64,
) -> PyResult<i32> {
    let cmd: Command = command.parse().map_err(py_err)?;
    let mut job = JobSpec::new(cmd, out);
    job.systems = systems;
    job.tangent = tangent;
    job.reduced = reduced;
    job.order = order;
    job.seed = seed;
    Ok(cli::run(&job).exit_code)
}

#[pymodule]
fn interpmor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDescriptor>()?;
    m.add_class::<PyCoprime>()?;
    m.add_class::<PyParametric>()?;
    m.add_function(wrap_pyfunction!(load_model, m)?)?;
    m.add_function(wrap_pyfunction!(three_state_example, m)?)?;
    m.add_function(wrap_pyfunction!(random_stable, m)?)?;
    m.add_function(wrap_pyfunction!(mass_spring, m)?)?;
    m.add_function(wrap_pyfunction!(delay_family, m)?)?;
    m.add_function(wrap_pyfunction!(interpolatory_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(dae_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(irka, m)?)?;
    m.add_function(wrap_pyfunction!(tf_irka, m)?)?;
    m.add_function(wrap_pyfunction!(h2_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_job, m)?)?;
    Ok(())
}
