//! Python bindings. Build with `maturin develop` or
//! `cargo build -p cfsi-py --features extension-module`.

use std::path::PathBuf;

use cfsi_core::bench::{self, RunSpec, SweepSpec};
use cfsi_core::{Error, Method, Mode, PatternParams};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_config() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Grayscale image with real-valued pixels, row-major.
#[pyclass(name = "Image", module = "cfsi")]
#[derive(Clone)]
pub struct PyImage {
    inner: cfsi_core::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        cfsi_core::Image::new(width, height, data)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cfsi_core::save_image(&self.inner, &path).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<PyImage> {
    cfsi_core::load_image(&path).map(|inner| PyImage { inner }).map_err(to_py)
}

#[pyfunction]
fn synthetic_scene(width: usize, height: usize) -> PyImage {
    PyImage {
        inner: cfsi_core::image::synthetic_scene(width, height),
    }
}

#[pyfunction]
fn mse(reference: &PyImage, test: &PyImage) -> PyResult<f64> {
    cfsi_core::mse(&reference.inner, &test.inner).map_err(to_py)
}

/// Returns `(mse, psnr_db)`; `psnr_db` is `inf` for identical images.
#[pyfunction]
#[pyo3(signature = (reference, test, bit_depth=8))]
fn psnr(reference: &PyImage, test: &PyImage, bit_depth: u32) -> PyResult<(f64, f64)> {
    let q = cfsi_core::psnr(&reference.inner, &test.inner, bit_depth).map_err(to_py)?;
    Ok((q.mse, q.psnr_db))
}

fn gray(fx: f64, fy: f64, theta: f64, width: usize, height: usize, a: f64, b: f64) -> PyResult<cfsi_core::GrayPattern> {
    cfsi_core::fourier_pattern(PatternParams::new(fx, fy, theta, width, height).with_amplitude(a, b)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (fx, fy, theta, width, height, a=0.5, b=0.5))]
fn fourier_pattern(fx: f64, fy: f64, theta: f64, width: usize, height: usize, a: f64, b: f64) -> PyResult<Vec<f64>> {
    Ok(gray(fx, fy, theta, width, height, a, b)?.data().to_vec())
}

/// Floyd–Steinberg dithered pattern as 0/1 bytes.
#[pyfunction]
#[pyo3(signature = (fx, fy, theta, width, height, a=0.5, b=0.5))]
fn dithered_pattern(fx: f64, fy: f64, theta: f64, width: usize, height: usize, a: f64, b: f64) -> PyResult<Vec<u8>> {
    let p = gray(fx, fy, theta, width, height, a, b)?;
    Ok(cfsi_core::floyd_steinberg(&p).data().to_vec())
}

/// Eight bit-planes, least significant first.
#[pyfunction]
#[pyo3(signature = (fx, fy, theta, width, height, a=0.5, b=0.5))]
fn bitplanes(fx: f64, fy: f64, theta: f64, width: usize, height: usize, a: f64, b: f64) -> PyResult<Vec<Vec<u8>>> {
    let p = gray(fx, fy, theta, width, height, a, b)?;
    Ok(cfsi_core::temporal_bitplanes(&p).iter().map(|b| b.data().to_vec()).collect())
}

/// List of `(u, v, kind)` in acquisition order.
#[pyfunction]
fn frequency_schedule(width: usize, height: usize) -> PyResult<Vec<(usize, usize, &'static str)>> {
    let s = cfsi_core::frequency_schedule(width, height).map_err(to_py)?;
    Ok(s.iter().map(|c| (c.u, c.v, c.kind.as_str())).collect())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// One acquisition + reconstruction. Returns `(image, row)` where `row` is a dict
/// with the results.csv columns.
#[pyfunction]
#[pyo3(signature = (object, method, mode, budget, sigma=0.0, seed=0, background=0.0))]
#[allow(clippy::too_many_arguments)]
fn run_single<'py>(
    py: Python<'py>,
    object: &PyImage,
    method: &str,
    mode: &str,
    budget: usize,
    sigma: f64,
    seed: u64,
    background: f64,
) -> PyResult<(PyImage, Bound<'py, PyDict>)> {
    let spec = RunSpec::new(parse::<Method>(method)?, parse::<Mode>(mode)?, budget)
        .with_noise(sigma, seed)
        .with_background(background);
    let (inner, row) = py
        .allow_threads(|| bench::run_single(&object.inner, &spec))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("method", row.method.as_str())?;
    d.set_item("mode", row.mode.as_str())?;
    d.set_item("budget", row.budget)?;
    d.set_item("sigma", row.sigma)?;
    d.set_item("seed", row.seed)?;
    d.set_item("coefficients_covered", row.coefficients_covered)?;
    d.set_item("mse", row.mse)?;
    d.set_item("psnr_db", row.psnr_db)?;
    d.set_item("wall_ms", row.wall_ms)?;
    Ok((PyImage { inner }, d))
}

/// Runs a key=value sweep spec. Returns `(computed, skipped)`.
#[pyfunction]
fn run_sweep(py: Python<'_>, spec_text: &str) -> PyResult<(usize, usize)> {
    let spec = SweepSpec::parse(spec_text).map_err(to_py)?;
    let s = py.allow_threads(|| bench::run_sweep(&spec)).map_err(to_py)?;
    Ok((s.computed, s.skipped))
}

/// Writes the five comparison panels and returns the differing-pixel count.
#[pyfunction]
#[pyo3(signature = (fx_num, fy_num, theta, size=128, out_dir=PathBuf::from(".")))]
fn diff_patterns(fx_num: usize, fy_num: usize, theta: f64, size: usize, out_dir: PathBuf) -> PyResult<usize> {
    bench::diff_patterns(fx_num, fy_num, theta, size, &out_dir)
        .map(|(d, _)| d.differing_pixels)
        .map_err(to_py)
}

#[pymodule]
fn cfsi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_scene, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(dithered_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(bitplanes, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(diff_patterns, m)?)?;
    Ok(())
}
