//! Python bindings for layerfuse.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use layerfuse::cli::{self, Report};
use layerfuse::eval::{self, WilcoxonMethod};
use layerfuse::reducers;
use layerfuse::synthetic::{self, SyntheticSpec};
use layerfuse::tensor_store::{self, ActivationTensor};
use layerfuse::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Argument(_) | Error::Config(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn report_to_py<'py>(py: Python<'py>, report: Report) -> PyResult<Bound<'py, PyAny>> {
    if report.ok {
        py.import("json")?.call_method1("loads", (report.json.to_string(),))
    } else {
        Err(PyRuntimeError::new_err(report.text.trim_end().to_string()))
    }
}

/// A `D x M x N` activation tensor stored channel-major as f32.
#[pyclass(name = "Tensor", module = "layerfuse_py", frozen)]
struct PyTensor {
    inner: ActivationTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> PyResult<Self> {
        let inner = ActivationTensor::new(channels, height, width, values).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = tensor_store::read_tensor(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        tensor_store::write_tensor(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    fn values(&self) -> Vec<f32> {
        self.inner.values().to_vec()
    }

    fn channel(&self, c: usize) -> PyResult<Vec<f32>> {
        if c >= self.inner.channels() {
            return Err(PyValueError::new_err(format!("channel {c} out of range")));
        }
        Ok(self.inner.channel(c).to_vec())
    }

    fn gmtp(&self) -> Vec<f64> {
        reducers::gmtp_values(&self.inner)
    }

    #[pyo3(signature = (radius = reducers::DEFAULT_RADIUS, epsilon = reducers::DEFAULT_EPSILON))]
    fn cooc(&self, radius: usize, epsilon: f64) -> Vec<f64> {
        reducers::cooc_tensor(&self.inner, radius, epsilon)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let (d, m, n) = self.inner.dims();
        format!("Tensor({d}x{m}x{n})")
    }
}

/// Leading `keep` zigzag-ordered 2-D DCT coefficients of one `height x width` map.
#[pyfunction]
fn dct_channel(map: Vec<f64>, height: usize, width: usize, keep: usize) -> PyResult<Vec<f64>> {
    reducers::dct_channel(&map, height, width, keep).map_err(to_py)
}

/// Leading `keep` coefficients of the 1-D DCT of a flattened vector.
#[pyfunction]
fn dct_global(vector: Vec<f64>, keep: usize) -> PyResult<Vec<f64>> {
    reducers::dct_global(&vector, keep).map_err(to_py)
}

#[pyfunction]
fn lbp_histogram(map: Vec<f64>, height: usize, width: usize) -> PyResult<Vec<f64>> {
    reducers::lbp_histogram(&map, height, width).map_err(to_py)
}

#[pyfunction]
fn gep(map: Vec<f64>) -> f64 {
    reducers::gep_value(&map)
}

#[pyfunction]
#[pyo3(signature = (column, labels, bins = reducers::DEFAULT_BINS))]
fn chi2_score(column: Vec<f64>, labels: Vec<usize>, bins: usize) -> PyResult<f64> {
    if column.len() != labels.len() {
        return Err(PyValueError::new_err("column and labels differ in length"));
    }
    if bins == 0 {
        return Err(PyValueError::new_err("bins must be positive"));
    }
    Ok(reducers::chi2_scores(&column, &labels, bins))
}

/// 1-based indices of the layers kept out of `layer_count`.
#[pyfunction]
#[pyo3(signature = (layer_count, stride = 10, tail = 4))]
fn select_layers(layer_count: usize, stride: usize, tail: usize) -> PyResult<Vec<usize>> {
    if stride == 0 {
        return Err(PyValueError::new_err("stride must be positive"));
    }
    Ok(reducers::select_layers(layer_count, stride, tail))
}

/// Paired two-sided signed-rank test; returns a dict with n_effective, w, p_value, method.
#[pyfunction]
fn wilcoxon<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::wilcoxon_signed_rank(&a, &b).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("n_effective", r.n_effective)?;
    out.set_item("w", r.w)?;
    out.set_item("p_value", r.p_value)?;
    let method = match r.method {
        WilcoxonMethod::Exact => "exact",
        WilcoxonMethod::NormalApproximation => "normal-approximation",
    };
    out.set_item("method", method)?;
    Ok(out)
}

/// Checks a manifest and every tensor it lists; raises on any diagnostic.
#[pyfunction]
fn validate<'py>(py: Python<'py>, manifest: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| cli::cmd_validate(&manifest));
    report_to_py(py, report)
}

/// Runs the cross-validated pipeline described by a TOML config and returns the results.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| cli::cmd_run(&config)).map_err(to_py)?;
    report_to_py(py, report)
}

#[pyfunction]
#[pyo3(signature = (a, b, method_a = None, method_b = None))]
fn compare<'py>(
    py: Python<'py>,
    a: PathBuf,
    b: PathBuf,
    method_a: Option<String>,
    method_b: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = cli::cmd_compare(&a, &b, method_a.as_deref(), method_b.as_deref()).map_err(to_py)?;
    report_to_py(py, report)
}

#[pyfunction]
fn merge<'py>(py: Python<'py>, inputs: Vec<PathBuf>, output: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = cli::cmd_merge(&inputs, &output).map_err(to_py)?;
    report_to_py(py, report)
}

/// Writes the seeded synthetic dataset (tensors plus manifest.json) into `directory`.
#[pyfunction]
#[pyo3(signature = (directory, seed = 1, per_class = 20, separation = 5.0))]
fn make_synthetic(directory: PathBuf, seed: u64, per_class: usize, separation: f32) -> PyResult<PathBuf> {
    let spec = SyntheticSpec {
        seed,
        per_class,
        separation,
        ..SyntheticSpec::default()
    };
    let data = synthetic::generate(&spec).map_err(to_py)?;
    synthetic::write_dataset(&data, &directory).map_err(to_py)?;
    Ok(directory.join("manifest.json"))
}

#[pymodule]
fn layerfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_function(wrap_pyfunction!(dct_channel, m)?)?;
    m.add_function(wrap_pyfunction!(dct_global, m)?)?;
    m.add_function(wrap_pyfunction!(lbp_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(gep, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_score, m)?)?;
    m.add_function(wrap_pyfunction!(select_layers, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(merge, m)?)?;
    m.add_function(wrap_pyfunction!(make_synthetic, m)?)?;
    m.add("LBP_BINS", reducers::LBP_BINS)?;
    m.add("GEP_BINS", reducers::GEP_BINS)?;
    Ok(())
}
