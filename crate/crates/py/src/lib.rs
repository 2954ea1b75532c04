//! Python bindings: `import lvalue_lab`.

use lvalue_lab::forms::{CatalogForm, NewformRecord};
use lvalue_lab::stats::{self, Sample, SymmetryGroup, TestKernel};
use lvalue_lab::trace::{self, FamilySpec, LevelFilter, Truncation};
use lvalue_lab::{arith, bessel, kloosterman, lfun, Error};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Unreachable { .. } | Error::NonConvergence { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Overflow(_) => PyOverflowError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for lvalue_lab::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

/// Any serializable report as nested dicts and lists.
fn to_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn truncation(tail: Option<f64>, c_max: Option<u64>) -> PyResult<Truncation> {
    match (tail, c_max) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give tail or c_max, not both")),
        (_, Some(c)) => Ok(Truncation::CMax(c)),
        (t, None) => Ok(Truncation::TargetTail(t.unwrap_or(1e-6))),
    }
}

fn level_filter(levels: &Bound<'_, PyAny>) -> PyResult<LevelFilter> {
    if let Ok(s) = levels.extract::<String>() {
        return match s.as_str() {
            "all" => Ok(LevelFilter::All),
            "squarefree" => Ok(LevelFilter::Squarefree),
            "prime" => Ok(LevelFilter::Prime),
            other => Err(PyValueError::new_err(format!("unknown level filter {other:?}"))),
        };
    }
    Ok(LevelFilter::Explicit(levels.extract::<Vec<u64>>()?))
}

/// A catalog newform (`"delta"`, `"f11"` or `"f5"`) with its q-expansion.
#[pyclass(frozen, name = "Newform")]
struct PyNewform {
    record: NewformRecord,
}

#[pymethods]
impl PyNewform {
    #[new]
    #[pyo3(signature = (name, terms = 5000, cache = None))]
    fn new(name: &str, terms: usize, cache: Option<std::path::PathBuf>) -> PyResult<Self> {
        let form: CatalogForm = name.parse().py()?;
        Ok(Self {
            record: NewformRecord::load(form, terms, cache.as_deref()).py()?,
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.record.form.name()
    }

    #[getter]
    fn level(&self) -> u64 {
        self.record.level
    }

    #[getter]
    fn weight(&self) -> u32 {
        self.record.weight
    }

    #[getter]
    fn conductor(&self) -> f64 {
        self.record.conductor()
    }

    fn __len__(&self) -> usize {
        self.record.len()
    }

    fn __repr__(&self) -> String {
        format!("Newform({:?}, terms={})", self.record.form.name(), self.record.len())
    }

    /// Integer coefficient `c(n)` as a Python int.
    fn c(&self, n: usize) -> PyResult<i128> {
        self.check(n)?;
        Ok(self.record.expansion.c(n))
    }

    /// Normalized coefficient `a(n) = c(n)/n^{(k−1)/2}`.
    fn a(&self, n: usize) -> PyResult<f64> {
        self.check(n)?;
        Ok(self.record.a(n))
    }

    fn root_number(&self) -> PyResult<i8> {
        lfun::root_number(&self.record).py()
    }

    fn central_value<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &lfun::central_value(&self.record).py()?)
    }

    fn l_value(&self, s: Complex64) -> PyResult<Complex64> {
        lfun::l_value(&self.record, s).py()
    }

    fn completed(&self, s: Complex64) -> PyResult<Complex64> {
        lfun::completed_lambda(&self.record, s).py()
    }

    fn hardy_z(&self, t: f64) -> PyResult<f64> {
        lfun::hardy_z(&self.record, t).py()
    }

    /// Ordinates of the zeros on the critical line in `(0, t_max]`.
    fn zeros(&self, t_max: f64) -> PyResult<Vec<f64>> {
        Ok(lfun::find_zeros(&self.record, t_max).py()?.ordinates)
    }

    fn p_sum(&self, x: f64) -> PyResult<f64> {
        stats::p_sum(&self.record, x).py()
    }

    fn rankin_sum(&self, x: f64) -> PyResult<f64> {
        stats::rankin_sum(&self.record, x).py()
    }

    fn hecke_check<'py>(&self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &lvalue_lab::forms::hecke_check(&self.record, n).py()?)
    }

    /// One-level density of the zeros up to `t_max` against a Fejér kernel.
    fn one_level_density<'py>(&self, py: Python<'py>, kernel: &PyFejerKernel, t_max: f64) -> PyResult<Bound<'py, PyAny>> {
        let zeros = lfun::find_zeros(&self.record, t_max).py()?;
        to_dict(py, &stats::one_level_density(&zeros, &self.record, &kernel.kernel))
    }

    fn explicit_formula_residual<'py>(&self, py: Python<'py>, x: f64, scan_height: f64) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &stats::explicit_formula_residual(&self.record, x, scan_height).py()?)
    }
}

impl PyNewform {
    fn check(&self, n: usize) -> PyResult<()> {
        if n == 0 || n > self.record.len() {
            return Err(PyValueError::new_err(format!("index {n} outside 1..={}", self.record.len())));
        }
        Ok(())
    }
}

/// Truncated Petersson average with a certified tail bound.
#[pyclass(frozen, get_all, name = "DeltaEstimate")]
struct PyDeltaEstimate {
    value: f64,
    c_max: u64,
    tail_bound: f64,
    q: u64,
    k: u32,
    m: u64,
    n: u64,
}

#[pymethods]
impl PyDeltaEstimate {
    fn __repr__(&self) -> String {
        format!(
            "DeltaEstimate(value={:?}, tail_bound={:?}, c_max={}, m={}, n={}, q={}, k={})",
            self.value, self.tail_bound, self.c_max, self.m, self.n, self.q, self.k
        )
    }
}

impl From<trace::DeltaEstimate> for PyDeltaEstimate {
    fn from(e: trace::DeltaEstimate) -> Self {
        Self {
            value: e.value,
            c_max: e.c_max,
            tail_bound: e.tail_bound,
            q: e.q,
            k: e.k,
            m: e.m,
            n: e.n,
        }
    }
}

/// `h(x) = (sin πsx / πsx)²` with `ĥ` supported in `(−s, s)`.
#[pyclass(frozen, name = "FejerKernel")]
struct PyFejerKernel {
    kernel: TestKernel,
}

#[pymethods]
impl PyFejerKernel {
    #[new]
    fn new(scale: f64) -> PyResult<Self> {
        Ok(Self {
            kernel: stats::fejer_kernel(scale).py()?,
        })
    }

    fn h(&self, x: f64) -> f64 {
        self.kernel.h(x)
    }

    fn h_hat(&self, y: f64) -> f64 {
        self.kernel.h_hat(y)
    }

    #[getter]
    fn support_radius(&self) -> f64 {
        self.kernel.support_radius()
    }

    /// `∫ W_G h` for `G` in `U, O, SOeven, SOodd, Sp`.
    fn density_integral(&self, group: &str) -> PyResult<f64> {
        let g: SymmetryGroup = group.parse().py()?;
        Ok(stats::density_integral_closed(g, &self.kernel))
    }
}

#[pyfunction]
#[pyo3(name = "kloosterman")]
fn py_kloosterman(m: u64, n: u64, c: u64) -> PyResult<f64> {
    kloosterman::kloosterman(m, n, c).py()
}

#[pyfunction]
fn bessel_j(order: u32, x: f64) -> PyResult<f64> {
    bessel::bessel_j(order, x).py()
}

#[pyfunction]
#[pyo3(signature = (m, n, q, k, tail = None, c_max = None))]
fn delta_full(py: Python<'_>, m: u64, n: u64, q: u64, k: u32, tail: Option<f64>, c_max: Option<u64>) -> PyResult<PyDeltaEstimate> {
    let t = truncation(tail, c_max)?;
    let mut v = py.detach(|| trace::delta_full_batch(&[(m, n)], q, k, t)).py()?;
    Ok(v.remove(0).into())
}

#[pyfunction]
#[pyo3(signature = (m, n, q, k, tail = None, c_max = None))]
fn delta_new(py: Python<'_>, m: u64, n: u64, q: u64, k: u32, tail: Option<f64>, c_max: Option<u64>) -> PyResult<PyDeltaEstimate> {
    let t = truncation(tail, c_max)?;
    let mut v = py.detach(|| trace::delta_new_batch(&[(m, n)], q, k, t)).py()?;
    Ok(v.remove(0).into())
}

#[pyfunction]
#[pyo3(signature = (scale, k, levels = None, tail = None, c_max = None))]
fn family_count<'py>(
    py: Python<'py>,
    scale: f64,
    k: u32,
    levels: Option<&Bound<'py, PyAny>>,
    tail: Option<f64>,
    c_max: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let filter = levels.map(level_filter).transpose()?.unwrap_or(LevelFilter::All);
    let spec = FamilySpec::new(scale, k).with_levels(filter);
    let t = truncation(tail, c_max)?;
    let count = py.detach(|| trace::family_count(&spec, t)).py()?;
    to_dict(py, &count)
}

#[pyfunction]
#[pyo3(signature = (scale, k, l, x, levels = None, tail = None, c_max = None))]
#[allow(clippy::too_many_arguments)]
fn harmonic_moment<'py>(
    py: Python<'py>,
    scale: f64,
    k: u32,
    l: u32,
    x: f64,
    levels: Option<&Bound<'py, PyAny>>,
    tail: Option<f64>,
    c_max: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let filter = levels.map(level_filter).transpose()?.unwrap_or(LevelFilter::All);
    let spec = FamilySpec::new(scale, k).with_levels(filter);
    let t = truncation(tail, c_max)?;
    let report = py.detach(|| stats::harmonic_moment(&spec, l, x, t)).py()?;
    to_dict(py, &report)
}

#[pyfunction]
fn gaussian_moment(l: u32) -> PyResult<u128> {
    stats::gaussian_moment(l).py()
}

#[pyfunction]
fn pairing_count(k: u32) -> PyResult<u128> {
    stats::pairing_count(k).py()
}

#[pyfunction]
fn gaussian_mass(alpha: f64, beta: f64) -> PyResult<f64> {
    stats::gaussian_mass(alpha, beta).py()
}

/// `samples`: iterable of `(value, weight, vanishing)`.
#[pyfunction]
#[pyo3(signature = (samples, alpha = f64::NEG_INFINITY, beta = f64::INFINITY))]
fn empirical_distribution<'py>(
    py: Python<'py>,
    samples: Vec<(f64, f64, bool)>,
    alpha: f64,
    beta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let samples: Vec<Sample> = samples
        .into_iter()
        .map(|(value, weight, vanishing)| Sample {
            value,
            weight,
            vanishing,
        })
        .collect();
    to_dict(py, &stats::empirical_distribution(&samples, alpha, beta).py()?)
}

#[pyfunction]
fn mertens_sum(x: f64) -> f64 {
    arith::mertens_sum(x)
}

#[pymodule]
#[pyo3(name = "lvalue_lab")]
fn lvalue_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNewform>()?;
    m.add_class::<PyDeltaEstimate>()?;
    m.add_class::<PyFejerKernel>()?;
    m.add_function(wrap_pyfunction!(py_kloosterman, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j, m)?)?;
    m.add_function(wrap_pyfunction!(delta_full, m)?)?;
    m.add_function(wrap_pyfunction!(delta_new, m)?)?;
    m.add_function(wrap_pyfunction!(family_count, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_moment, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_moment, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_count, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_mass, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(mertens_sum, m)?)?;
    Ok(())
}
