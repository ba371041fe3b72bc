use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use skipfree::error::Error;
use skipfree::extrema::{self, Direction};
use skipfree::fluctuation;
use skipfree::format;
use skipfree::linalg::Mat;
use skipfree::mmbm;
use skipfree::model::{self, Model};
use skipfree::sim::{self, LatticeTarget, MmbmTarget, SimConfig};
use skipfree::solvers::SolveOptions;
use skipfree::verify;

create_exception!(pyskipfree, SkipfreeError, PyException);

fn err(e: Error) -> PyErr {
    SkipfreeError::new_err(format!("{}: {e}", e.kind()))
}

type Rows = Vec<Vec<f64>>;

fn rows(m: &Mat) -> Rows {
    format::rows_of(m)
}

fn mat(r: &Rows) -> PyResult<Mat> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(SkipfreeError::new_err("matrices must be square lists of rows"));
    }
    Ok(Mat::from_fn(n, n, |i, j| r[i][j]))
}

fn opts(tol: f64, max_iter: usize) -> SolveOptions {
    SolveOptions {
        tol,
        max_iter,
        ..SolveOptions::default()
    }
}

fn direction(s: &str) -> PyResult<Direction> {
    match s {
        "max" => Ok(Direction::Max),
        "min" => Ok(Direction::Min),
        _ => Err(SkipfreeError::new_err("direction must be 'max' or 'min'")),
    }
}

/// Skip-free-downward lattice model given by blocks `A[-1], A[0], ..., A[M]`.
#[pyclass(module = "pyskipfree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct LatticeModel {
    inner: model::LatticeModel,
}

#[pymethods]
impl LatticeModel {
    #[new]
    #[pyo3(signature = (blocks, extra_killing=None))]
    fn new(blocks: Vec<Rows>, extra_killing: Option<Vec<f64>>) -> PyResult<Self> {
        let blocks = blocks.iter().map(mat).collect::<PyResult<Vec<_>>>()?;
        let mut inner = model::LatticeModel::new(blocks).map_err(err)?;
        if let Some(q) = extra_killing {
            inner = inner.with_killing(&q).map_err(err)?;
        }
        Ok(LatticeModel { inner })
    }

    #[staticmethod]
    fn birth_death(up: f64, down: f64) -> PyResult<Self> {
        Ok(LatticeModel {
            inner: model::birth_death(up, down).map_err(err)?,
        })
    }

    #[getter]
    fn n_phases(&self) -> usize {
        self.inner.n_phases()
    }

    #[getter]
    fn max_jump(&self) -> usize {
        self.inner.max_jump()
    }

    #[getter]
    fn is_defective(&self) -> bool {
        self.inner.is_defective()
    }

    fn blocks(&self) -> Vec<Rows> {
        self.inner.blocks().iter().map(rows).collect()
    }

    /// `(regime tag, asymptotic drift)`.
    fn regime(&self) -> PyResult<(String, f64)> {
        let r = self.inner.drift_and_pi().map_err(err)?;
        Ok((r.tag.as_str().to_string(), r.mu))
    }

    fn reverse(&self) -> PyResult<Self> {
        Ok(LatticeModel {
            inner: self.inner.reverse().map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        format::to_json_string(&format::ModelFile::from_model(&Model::Lattice(self.inner.clone())), false)
    }

    fn hash(&self) -> String {
        format::model_hash(&Model::Lattice(self.inner.clone()))
    }

    fn __repr__(&self) -> String {
        format!(
            "LatticeModel(phases={}, max_jump={}, defective={})",
            self.inner.n_phases(),
            self.inner.max_jump(),
            self.inner.is_defective()
        )
    }
}

/// Markov-modulated Brownian motion.
#[pyclass(module = "pyskipfree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct MmbmModel {
    inner: model::MmbmModel,
}

#[pymethods]
impl MmbmModel {
    #[new]
    #[pyo3(signature = (drift, sigma2, q, extra_killing=None))]
    fn new(drift: Vec<f64>, sigma2: Vec<f64>, q: Rows, extra_killing: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(MmbmModel {
            inner: model::MmbmModel::new(drift, sigma2, mat(&q)?, extra_killing).map_err(err)?,
        })
    }

    #[getter]
    fn n_phases(&self) -> usize {
        self.inner.n_phases()
    }

    fn regime(&self) -> PyResult<(String, f64)> {
        let r = self.inner.drift_and_pi().map_err(err)?;
        Ok((r.tag.as_str().to_string(), r.mu))
    }

    fn hash(&self) -> String {
        format::model_hash(&Model::Mmbm(self.inner.clone()))
    }

    fn __repr__(&self) -> String {
        format!("MmbmModel(phases={})", self.inner.n_phases())
    }
}

/// Reads a model file; returns a `LatticeModel` or an `MmbmModel`.
#[pyfunction]
fn load_model(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    match format::parse_model(text).map_err(err)? {
        Model::Lattice(inner) => Ok(Py::new(py, LatticeModel { inner })?.into_any()),
        Model::Mmbm(inner) => Ok(Py::new(py, MmbmModel { inner })?.into_any()),
    }
}

/// Fundamental matrices and fluctuation quantities of a lattice model.
#[pyclass(module = "pyskipfree", frozen)]
struct LatticeAnalysis {
    inner: fluctuation::LatticeAnalysis,
}

#[pymethods]
impl LatticeAnalysis {
    #[new]
    #[pyo3(signature = (model, horizon=64, tol=1e-12, max_iter=1_000_000))]
    fn new(py: Python<'_>, model: &LatticeModel, horizon: usize, tol: f64, max_iter: usize) -> PyResult<Self> {
        let m = model.inner.clone();
        let inner = py
            .detach(|| fluctuation::LatticeAnalysis::new(m, &opts(tol, max_iter), horizon))
            .map_err(err)?;
        Ok(LatticeAnalysis { inner })
    }

    #[getter]
    fn g(&self) -> Rows {
        rows(&self.inner.fund.g)
    }

    #[getter]
    fn r(&self) -> Rows {
        rows(&self.inner.fund.r)
    }

    /// `None` in the null-recurrent case.
    #[getter]
    fn h(&self) -> Option<Rows> {
        self.inner.fund.h.as_ref().map(rows)
    }

    #[getter]
    fn regime(&self) -> (String, f64) {
        let r = &self.inner.fund.regime;
        (r.tag.as_str().to_string(), r.mu)
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn residuals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in &self.inner.fund.residuals {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn occupation(&self, k: i64) -> PyResult<Rows> {
        Ok(rows(&self.inner.fund.occupation_at_level(k).map_err(err)?))
    }

    fn two_sided_exit(&self, a: usize, b: usize) -> PyResult<Rows> {
        Ok(rows(&self.inner.two_sided_exit(a, b).map_err(err)?))
    }

    /// `W(0), ..., W(k)`.
    fn scale(&self, k: usize) -> PyResult<Vec<Rows>> {
        let s = self.inner.scale().map_err(err)?;
        (0..=k as i64).map(|j| s.w(j).map(|w| rows(&w)).map_err(err)).collect()
    }

    fn creeping(&self, m: usize) -> PyResult<Rows> {
        Ok(rows(&self.inner.creeping(m).map_err(err)?))
    }

    fn hit_before_upcross(&self, m: usize, l: usize) -> PyResult<Rows> {
        Ok(rows(&self.inner.hit_before_upcross(m, l).map_err(err)?))
    }

    fn strip_occupation(&self, k: i64, l: usize, m: usize) -> PyResult<Rows> {
        Ok(rows(&self.inner.strip_occupation(k, l, m).map_err(err)?))
    }

    /// Cells `(m, l, matrix)` of the extremum law at killing, with the
    /// captured mass and the tail bound.
    #[pyo3(signature = (direction="max", tail_tol=1e-10, max_horizon=4096))]
    fn extrema(
        &self,
        py: Python<'_>,
        direction: &str,
        tail_tol: f64,
        max_horizon: usize,
    ) -> PyResult<(Vec<(usize, usize, Rows)>, f64, f64)> {
        let dir = self::direction(direction)?;
        let law = py
            .detach(|| extrema::extrema_law(&self.inner, dir, tail_tol, max_horizon))
            .map_err(err)?;
        let cells = law.cells.iter().map(|c| (c.m, c.l, rows(&c.prob))).collect();
        Ok((cells, law.captured_mass, law.tail_bound))
    }

    /// `(xi_star, phi)` of the decay diagnostic.
    #[pyo3(signature = (k=40))]
    fn decay(&self, k: usize) -> PyResult<(f64, Option<f64>)> {
        let r = self.inner.decay_diagnostic(k).map_err(err)?;
        Ok((r.xi_star, r.phi))
    }

    /// `(residual, tail bound, rounding allowance)` of the scale transform at `z`.
    fn check_scale_transform(&self, z: f64) -> PyResult<(f64, f64, f64)> {
        let c = self.inner.check_scale_transform(z).map_err(err)?;
        Ok((c.residual, c.tail_bound, c.rounding))
    }
}

/// Fundamental matrices and scale function of an all-Brownian MMBM.
#[pyclass(module = "pyskipfree", frozen)]
struct MmbmAnalysis {
    inner: mmbm::MmbmAnalysis,
}

#[pymethods]
impl MmbmAnalysis {
    #[new]
    #[pyo3(signature = (model, tol=1e-12, max_iter=1_000_000))]
    fn new(model: &MmbmModel, tol: f64, max_iter: usize) -> PyResult<Self> {
        Ok(MmbmAnalysis {
            inner: mmbm::MmbmAnalysis::new(model.inner.clone(), &opts(tol, max_iter)).map_err(err)?,
        })
    }

    #[getter]
    fn g(&self) -> Rows {
        rows(&self.inner.fund.g)
    }

    #[getter]
    fn lambda_(&self) -> Option<Rows> {
        self.inner.fund.lambda.as_ref().map(rows)
    }

    #[getter]
    fn r(&self) -> Rows {
        rows(&self.inner.fund.r)
    }

    #[getter]
    fn h(&self) -> Option<Rows> {
        self.inner.fund.h.as_ref().map(rows)
    }

    fn scale(&self, x: f64) -> PyResult<Rows> {
        Ok(rows(&self.inner.scale(x).map_err(err)?))
    }

    fn exit(&self, a: f64, b: f64) -> PyResult<Rows> {
        Ok(rows(&self.inner.exit(a, b).map_err(err)?))
    }

    fn creeping_residual(&self, x: f64) -> PyResult<f64> {
        self.inner.creeping_residual(x).map_err(err)
    }
}

/// Runs the identity suite; returns `(name, status, residual, limit, note)` rows.
#[pyfunction]
#[pyo3(signature = (model, horizon=20, tol=1e-12))]
fn verify_lattice(
    py: Python<'_>,
    model: &LatticeModel,
    horizon: usize,
    tol: f64,
) -> Vec<(String, String, Option<f64>, Option<f64>, Option<String>)> {
    let m = model.inner.clone();
    let checks = py.detach(|| verify::verify_lattice(&m, &opts(tol, 1_000_000), horizon));
    checks
        .into_iter()
        .map(|c| {
            let status = match c.status {
                verify::Status::Pass => "pass",
                verify::Status::Fail => "fail",
                verify::Status::Skip => "skip",
            };
            (c.name, status.to_string(), c.residual, c.limit, c.note)
        })
        .collect()
}

/// Monte Carlo estimate `(mean, stderr)` for a lattice model. `target` is one
/// of `g`, `exit`, `occupation`, `creep`, `extrema`, `holding`.
#[pyfunction]
#[pyo3(signature = (model, target, n_paths=100_000, seed=42, k=None, a=None, b=None, l=None, m=None, direction="max"))]
#[allow(clippy::too_many_arguments)]
fn simulate_lattice(
    py: Python<'_>,
    model: &LatticeModel,
    target: &str,
    n_paths: u64,
    seed: u64,
    k: Option<i64>,
    a: Option<u64>,
    b: Option<u64>,
    l: Option<u64>,
    m: Option<u64>,
    direction: &str,
) -> PyResult<(Rows, Rows)> {
    let missing = |name: &str| SkipfreeError::new_err(format!("target {target} needs {name}"));
    let t = match target {
        "g" => LatticeTarget::G {
            k: k.ok_or_else(|| missing("k"))?.max(0) as u64,
        },
        "exit" => LatticeTarget::Exit {
            a: a.ok_or_else(|| missing("a"))?,
            b: b.ok_or_else(|| missing("b"))?,
        },
        "occupation" => LatticeTarget::StripOccupation {
            k: k.ok_or_else(|| missing("k"))?,
            l: l.ok_or_else(|| missing("l"))?,
            m: m.ok_or_else(|| missing("m"))?,
        },
        "creep" => LatticeTarget::Creeping {
            m: m.ok_or_else(|| missing("m"))?,
        },
        "extrema" => LatticeTarget::Extrema {
            direction: self::direction(direction)?,
            m: m.ok_or_else(|| missing("m"))?,
            l: l.ok_or_else(|| missing("l"))?,
        },
        "holding" => LatticeTarget::HoldingTime,
        _ => return Err(SkipfreeError::new_err(format!("unknown target {target}"))),
    };
    let cfg = SimConfig {
        n_paths,
        seed,
        ..SimConfig::default()
    };
    let inner = model.inner.clone();
    let est = py.detach(|| sim::sim_lattice(&inner, t, &cfg)).map_err(err)?;
    Ok((rows(&est.mean), rows(&est.stderr)))
}

/// Euler Monte Carlo `(mean, stderr)` of the two-sided exit matrix of an MMBM.
#[pyfunction]
#[pyo3(signature = (model, a, b, n_paths=100_000, seed=42, dt=1e-3))]
fn simulate_mmbm_exit(
    py: Python<'_>,
    model: &MmbmModel,
    a: f64,
    b: f64,
    n_paths: u64,
    seed: u64,
    dt: f64,
) -> PyResult<(Rows, Rows)> {
    let cfg = SimConfig {
        n_paths,
        seed,
        euler_dt: dt,
        ..SimConfig::default()
    };
    let inner = model.inner.clone();
    let est = py
        .detach(|| sim::sim_mmbm(&inner, MmbmTarget::Exit { a, b }, &cfg))
        .map_err(err)?;
    Ok((rows(&est.mean), rows(&est.stderr)))
}

#[pymodule]
fn pyskipfree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SkipfreeError", m.py().get_type::<SkipfreeError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<LatticeModel>()?;
    m.add_class::<MmbmModel>()?;
    m.add_class::<LatticeAnalysis>()?;
    m.add_class::<MmbmAnalysis>()?;
    m.add_function(wrap_pyfunction!(load_model, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_mmbm_exit, m)?)?;
    Ok(())
}
