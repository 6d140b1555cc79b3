//! Python bindings. Arrays cross the boundary as nested lists of floats.

use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use vline_core as core;

fn to_py(err: core::Error) -> PyErr {
    match err {
        core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Scan geometry and regularization.
#[pyclass(name = "ScanConfig", module = "vline", skip_from_py_object)]
#[derive(Clone)]
struct PyScanConfig {
    inner: core::ScanConfig,
}

#[pymethods]
impl PyScanConfig {
    #[new]
    #[pyo3(signature = (radius=8.0, mu=0.15, num_angles=100, num_radii=100, half_width=100, lam=8e-4, lam0=0.0))]
    fn new(
        radius: f64,
        mu: f64,
        num_angles: usize,
        num_radii: usize,
        half_width: usize,
        lam: f64,
        lam0: f64,
    ) -> PyResult<Self> {
        let inner = core::ScanConfig::new(radius, mu, num_angles, num_radii, half_width, lam, lam0);
        inner.check().map_err(to_py)?;
        Ok(PyScanConfig { inner })
    }

    #[staticmethod]
    fn reference() -> Self {
        PyScanConfig { inner: core::ScanConfig::reference() }
    }

    fn with_mu(&self, mu: f64) -> Self {
        PyScanConfig { inner: self.inner.with_mu(mu) }
    }

    #[pyo3(signature = (lam, lam0=0.0))]
    fn with_lambda(&self, lam: f64, lam0: f64) -> Self {
        PyScanConfig { inner: self.inner.with_lambda(lam, lam0) }
    }

    fn warnings(&self) -> Vec<String> {
        self.inner.validate().warnings
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn num_angles(&self) -> usize {
        self.inner.num_angles
    }

    #[getter]
    fn num_radii(&self) -> usize {
        self.inner.num_radii
    }

    #[getter]
    fn half_width(&self) -> usize {
        self.inner.half_width
    }

    fn __repr__(&self) -> String {
        format!(
            "ScanConfig(radius={}, mu={}, num_angles={}, num_radii={}, half_width={})",
            self.inner.radius, self.inner.mu, self.inner.num_angles, self.inner.num_radii, self.inner.half_width
        )
    }
}

/// Image on the `(2M+1) x (2M+1)` grid; `values[a][b]` sits at `((a-M)h, (b-M)h)`.
#[pyclass(name = "Image", module = "vline", skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: core::CartesianImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(half_width: usize, radius: f64, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = core::CartesianImage::new(half_width, radius, from_rows(values)?).map_err(to_py)?;
        Ok(PyImage { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let c = core::load_container(path).map_err(to_py)?;
        Ok(PyImage { inner: c.into_image().map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core::save_container(path, &self.inner.clone().into()).map_err(to_py)
    }

    fn export_pgm(&self, path: &str) -> PyResult<()> {
        core::export_pgm(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn half_width(&self) -> usize {
        self.inner.half_width()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.values())
    }

    fn __repr__(&self) -> String {
        format!("Image(half_width={}, radius={})", self.inner.half_width(), self.inner.radius())
    }
}

/// V-line data, `P` vertex angles by `Q + 1` opening angles.
#[pyclass(name = "Sinogram", module = "vline", skip_from_py_object)]
#[derive(Clone)]
struct PySinogram {
    inner: core::VSinogram,
}

#[pymethods]
impl PySinogram {
    #[new]
    fn new(radius: f64, mu: f64, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = core::VSinogram::new(radius, mu, from_rows(values)?).map_err(to_py)?;
        Ok(PySinogram { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let c = core::load_container(path).map_err(to_py)?;
        Ok(PySinogram { inner: c.into_sinogram().map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core::save_container(path, &self.inner.clone().into()).map_err(to_py)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.values())
    }

    fn __repr__(&self) -> String {
        let (p, q) = self.inner.values().dim();
        format!("Sinogram({p}x{q}, radius={}, mu={})", self.inner.radius(), self.inner.mu())
    }
}

/// Rasterized three-disc test phantom.
#[pyfunction]
#[pyo3(signature = (half_width=100, radius=8.0))]
fn three_discs(half_width: usize, radius: f64) -> PyResult<PyImage> {
    let inner = core::EllipsePhantom::three_discs().rasterize(half_width, radius).map_err(to_py)?;
    Ok(PyImage { inner })
}

/// Rasterized disc of radius `a` centered at the origin.
#[pyfunction]
#[pyo3(signature = (a=2.0, intensity=1.0, half_width=100, radius=8.0))]
fn centered_disc(a: f64, intensity: f64, half_width: usize, radius: f64) -> PyResult<PyImage> {
    let inner = core::EllipsePhantom::centered_disc(a, intensity)
        .rasterize(half_width, radius)
        .map_err(to_py)?;
    Ok(PyImage { inner })
}

/// Rasterizes a phantom given as a JSON list of ellipse components.
#[pyfunction]
#[pyo3(signature = (description, half_width=100, radius=8.0))]
fn phantom_from_json(description: &str, half_width: usize, radius: f64) -> PyResult<PyImage> {
    let phantom: core::EllipsePhantom =
        serde_json::from_str(description).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let inner = phantom.rasterize(half_width, radius).map_err(to_py)?;
    Ok(PyImage { inner })
}

/// Closed-form V-line value of a centered disc.
#[pyfunction]
fn analytic_disc(a: f64, intensity: f64, cfg: &PyScanConfig, psi: f64) -> PyResult<f64> {
    core::analytic_vline_centered_disc(a, intensity, &cfg.inner, 0.0, psi).map_err(to_py)
}

#[pyfunction]
fn forward(py: Python<'_>, image: &PyImage, cfg: &PyScanConfig) -> PyResult<PySinogram> {
    let inner = py.detach(|| core::forward_vline(&image.inner, &cfg.inner)).map_err(to_py)?;
    Ok(PySinogram { inner })
}

/// Poisson counts scaled to `total_counts`; returns the noisy data and the
/// largest single-bin count.
#[pyfunction]
fn poisson_noise(sino: &PySinogram, total_counts: u64, seed: u64) -> PyResult<(PySinogram, u64)> {
    let noisy = core::poisson_noise(&sino.inner, total_counts, seed).map_err(to_py)?;
    Ok((PySinogram { inner: noisy.sinogram }, noisy.max_bin_count))
}

#[pyfunction]
fn reconstruct(py: Python<'_>, sino: &PySinogram, cfg: &PyScanConfig) -> PyResult<PyImage> {
    let inner = py.detach(|| core::reconstruct(&sino.inner, &cfg.inner)).map_err(to_py)?;
    Ok(PyImage { inner })
}

#[pyfunction]
fn relative_error(image: &PyImage, reference: &PyImage) -> PyResult<f64> {
    core::relative_l2_error(&image.inner, &reference.inner).map_err(to_py)
}

/// `(lambda, error)` pairs for an increasing list of regularization values.
#[pyfunction]
fn lambda_sweep(
    py: Python<'_>,
    sino: &PySinogram,
    cfg: &PyScanConfig,
    lambdas: Vec<f64>,
    reference: &PyImage,
) -> PyResult<Vec<(f64, f64)>> {
    py.detach(|| core::lambda_sweep(&sino.inner, &cfg.inner, &lambdas, &reference.inner))
        .map_err(to_py)
}

/// `(assumed mu, error)` pairs.
#[pyfunction]
fn mismatch(
    py: Python<'_>,
    sino: &PySinogram,
    cfg: &PyScanConfig,
    mus: Vec<f64>,
    reference: &PyImage,
) -> PyResult<Vec<(f64, f64)>> {
    py.detach(|| core::mismatch_experiment(&sino.inner, &cfg.inner, &mus, &reference.inner))
        .map_err(to_py)
}

/// Dense `Q x Q` kernel matrix of harmonic `n`.
#[pyfunction]
fn kernel_matrix(n: i64, cfg: &PyScanConfig) -> PyResult<Vec<Vec<f64>>> {
    let k = core::AbelKernelMatrix::assemble(n, &cfg.inner).map_err(to_py)?;
    Ok(to_rows(k.entries()))
}

/// Condition numbers of the kernel matrices for `n = 0..=n_max`.
#[pyfunction]
#[pyo3(signature = (n_max=50, mu=0.15, radius=8.0, num_radii=100))]
fn condition_numbers(py: Python<'_>, n_max: usize, mu: f64, radius: f64, num_radii: usize) -> PyResult<Vec<f64>> {
    let cfg = core::ScanConfig::new(radius, mu, 2 * (n_max + 1), num_radii, 1, 0.0, 0.0);
    py.detach(|| {
        let bank = core::KernelBank::assemble(&cfg)?;
        (0..=n_max as i64).map(|n| core::condition_number(bank.get(n))).collect::<core::Result<Vec<_>>>()
    })
    .map_err(to_py)
}

#[pyfunction]
fn chebyshev_t(k: u32, z: f64) -> PyResult<f64> {
    core::chebyshev_t(k, z).map_err(to_py)
}

#[pyfunction]
fn kernel_k_hat(n: i64, t: f64, rho: f64, mu: f64, radius: f64) -> PyResult<f64> {
    core::kernel_k_hat(n, t, rho, mu, radius).map_err(to_py)
}

#[pymodule]
fn vline(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScanConfig>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PySinogram>()?;
    m.add_function(wrap_pyfunction!(three_discs, m)?)?;
    m.add_function(wrap_pyfunction!(centered_disc, m)?)?;
    m.add_function(wrap_pyfunction!(phantom_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_disc, m)?)?;
    m.add_function(wrap_pyfunction!(forward, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_noise, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(condition_numbers, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_t, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_k_hat, m)?)?;
    Ok(())
}
