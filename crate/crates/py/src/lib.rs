//! Python bindings: scenes, rendering, fitting, metrics and the numeric
//! building blocks.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use discsplat_core as core;
use core::bezier::{implicitize, solve_cubic_real, CubicBezier};
use core::fit::{self, loss, FitConfig};
use core::io::{load_png, save_png};
use core::math::Vec2;
use core::raster::{prepare, render, RasterParams};

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// An RGB image with float channels in `[0, 1]`.
#[pyclass(name = "Image", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: core::io::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    #[pyo3(signature = (width, height, fill = [0.0, 0.0, 0.0]))]
    fn new(width: usize, height: usize, fill: [f64; 3]) -> Self {
        Self {
            inner: core::io::Image::new(width, height, fill),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_png(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_png(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<[f64; 3]> {
        if x >= self.inner.width || y >= self.inner.height {
            return Err(PyValueError::new_err("pixel out of range"));
        }
        Ok(self.inner.get(x, y))
    }

    /// Rows of `[r, g, b]` lists.
    fn to_list(&self) -> Vec<Vec<[f64; 3]>> {
        self.inner
            .pixels
            .chunks(self.inner.width.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    /// Quantized bytes, row-major RGB.
    fn to_rgb8(&self) -> Vec<u8> {
        self.inner.to_rgb8()
    }
}

#[pyclass(name = "Scene", from_py_object)]
#[derive(Clone)]
struct PyScene {
    inner: core::scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Jittered-grid initialization with non-cutting curves.
    #[staticmethod]
    #[pyo3(signature = (width, height, splats, curves = 3, seed = 0, target = None))]
    fn init(width: usize, height: usize, splats: usize, curves: usize, seed: u64, target: Option<PyImage>) -> PyResult<Self> {
        let inner = core::scene::init_scene(width, height, splats, curves, seed, target.as_ref().map(|t| &t.inner))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::scene::Scene::from_json(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::scene::Scene::load(&path).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn curves(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn mode(&self) -> String {
        format!("{:?}", self.inner.mode())
    }

    /// Forward render of a flat scene.
    fn render(&self, py: Python<'_>, width: usize, height: usize) -> PyResult<PyImage> {
        let scene = &self.inner;
        let image = py
            .detach(|| {
                let params = RasterParams::default();
                let p = prepare(scene, None, width, height, &params)?;
                Ok(render(&p, width, height, scene.background, &params).image)
            })
            .map_err(py_err)?;
        Ok(PyImage { inner: image })
    }
}

/// Fits a flat scene to `target`. `config` is TOML (or JSON) text. Returns the
/// fitted scene and the checkpoint CSV.
#[pyfunction]
#[pyo3(signature = (target, config = None, baseline = false))]
fn fit_image(py: Python<'_>, target: PyImage, config: Option<&str>, baseline: bool) -> PyResult<(PyScene, String)> {
    let mut cfg = match config {
        Some(text) => FitConfig::parse(text).map_err(py_err)?,
        None => FitConfig::default(),
    };
    cfg.freeze_curves |= baseline;
    let out = py
        .detach(|| fit::fit(&target.inner, &cfg, None, |_, _| {}))
        .map_err(py_err)?;
    Ok((PyScene { inner: out.scene }, out.report.to_csv()))
}

/// `(psnr, ssim)`
#[pyfunction]
fn metrics(render: PyImage, target: PyImage) -> PyResult<(f64, f64)> {
    loss::metrics(&render.inner, &target.inner).map_err(py_err)
}

/// Real roots of `a3 t³ + a2 t² + a1 t + a0`, ascending.
#[pyfunction]
fn solve_cubic(a3: f64, a2: f64, a1: f64, a0: f64) -> PyResult<Vec<f64>> {
    solve_cubic_real(a3, a2, a1, a0)
        .map(|r| r.as_slice().to_vec())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Whether each point lies on the kept side of the curve through the four
/// control points.
#[pyfunction]
fn classify(control_points: [[f64; 2]; 4], points: Vec<[f64; 2]>) -> PyResult<Vec<bool>> {
    let curve = CubicBezier {
        points: control_points.map(|[x, y]| Vec2::new(x, y)),
    };
    let imp = implicitize(&curve).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(points.iter().map(|&[x, y]| imp.classify(Vec2::new(x, y))).collect())
}

/// Runs one of the self-checks and returns `(passed, table)`.
#[pyfunction]
#[pyo3(signature = (name, seed = 0, size = 100))]
fn self_check(py: Python<'_>, name: &str, seed: u64, size: usize) -> PyResult<(bool, String)> {
    let report = py.detach(|| match name {
        "grad" => Some(core::check::grad_check(seed, size, 1e-4, 1e-4)),
        "implicit" => Some(core::check::implicit_check(size, 200, seed, 1e-6)),
        "solver" => Some(core::check::solver_check(size, seed, 1e-7)),
        _ => None,
    });
    let report = report.ok_or_else(|| PyValueError::new_err(format!("unknown check {name:?}")))?;
    Ok((report.pass(), report.to_string()))
}

#[pymodule]
fn discsplat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(fit_image, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cubic, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(self_check, m)?)?;
    Ok(())
}
