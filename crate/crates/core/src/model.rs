//! Domain types shared by every stage: scan geometry, images on the
//! Cartesian and polar grids, V-line sinograms and harmonic stacks.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `mu * R` for which the inversion is known to be unique.
pub const UNIQUENESS_LIMIT: f64 = 1.5;

/// Unit vector `(cos phi, sin phi)` and its positively oriented orthogonal
/// complement `(-sin phi, cos phi)`.
pub fn unit_vector(phi: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = phi.sin_cos();
    ([c, s], [-s, c])
}

/// Harmonic index stored in row `row` of a length-`p` DFT (wrap-around order).
pub fn harmonic_of_row(row: usize, p: usize) -> i64 {
    if row < p / 2 {
        row as i64
    } else {
        row as i64 - p as i64
    }
}

/// Row holding harmonic `n` in wrap-around order.
pub fn row_of_harmonic(n: i64, p: usize) -> usize {
    n.rem_euclid(p as i64) as usize
}

/// Geometry and physics of a scan plus the per-harmonic regularization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Detector circle radius (cm).
    pub radius: f64,
    /// Attenuation coefficient (1/cm).
    pub mu: f64,
    /// Number of vertex angles `P`.
    pub num_angles: usize,
    /// Number of radial / opening-angle samples `Q`.
    pub num_radii: usize,
    /// Cartesian half width `M`; images are `(2M+1) x (2M+1)`.
    pub half_width: usize,
    /// Regularization parameters, one per harmonic, in wrap-around order.
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl ScanConfig {
    /// Configuration with `lambda_0` for the zeroth harmonic and `lambda`
    /// for every other one.
    pub fn new(
        radius: f64,
        mu: f64,
        num_angles: usize,
        num_radii: usize,
        half_width: usize,
        lambda: f64,
        lambda_0: f64,
    ) -> Self {
        let mut lambdas = vec![lambda; num_angles];
        if let Some(first) = lambdas.first_mut() {
            *first = lambda_0;
        }
        ScanConfig {
            radius,
            mu,
            num_angles,
            num_radii,
            half_width,
            lambda: lambdas,
        }
    }

    /// The setup used throughout the numerical experiments: R = 8 cm,
    /// mu = 0.15/cm, P = Q = M = 100, lambda = 8e-4 away from n = 0.
    pub fn reference() -> Self {
        ScanConfig::new(8.0, 0.15, 100, 100, 100, 8e-4, 0.0)
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        ScanConfig { mu, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: f64, lambda_0: f64) -> Self {
        ScanConfig::new(
            self.radius,
            self.mu,
            self.num_angles,
            self.num_radii,
            self.half_width,
            lambda,
            lambda_0,
        )
    }

    pub fn lambda_for(&self, n: i64) -> f64 {
        self.lambda[row_of_harmonic(n, self.num_angles)]
    }

    /// Harmonic indices `-P/2 .. P/2-1` in wrap-around storage order.
    pub fn harmonics(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.num_angles).map(move |row| harmonic_of_row(row, self.num_angles))
    }

    /// Vertex angle `phi_p = 2 pi p / P`.
    pub fn vertex_angle(&self, p: usize) -> f64 {
        2.0 * PI * p as f64 / self.num_angles as f64
    }

    /// Data radius `s_q = q R / Q`.
    pub fn data_radius(&self, q: usize) -> f64 {
        q as f64 * self.radius / self.num_radii as f64
    }

    /// Half opening angle `psi_q = arcsin(s_q / R)`.
    pub fn opening_angle(&self, q: usize) -> f64 {
        (q as f64 / self.num_radii as f64).min(1.0).asin()
    }

    /// Midpoint radius `r_j = (j + 1/2) R / Q`.
    pub fn midpoint_radius(&self, j: usize) -> f64 {
        midpoint_radius(j, self.radius, self.num_radii)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.radius.is_finite() && self.radius > 0.0) {
            report.errors.push(format!("radius must be positive, got {}", self.radius));
        }
        if !self.mu.is_finite() {
            report.errors.push(format!("mu must be finite, got {}", self.mu));
        }
        if self.num_angles < 2 || self.num_angles % 2 != 0 {
            report
                .errors
                .push(format!("P must be even and >= 2, got {}", self.num_angles));
        }
        if self.num_radii < 2 {
            report.errors.push(format!("Q must be >= 2, got {}", self.num_radii));
        }
        if self.half_width < 1 {
            report.errors.push("M must be >= 1".to_string());
        }
        if self.lambda.len() != self.num_angles {
            report.errors.push(format!(
                "lambda has {} entries, expected P = {}",
                self.lambda.len(),
                self.num_angles
            ));
        }
        if let Some(bad) = self.lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            report
                .errors
                .push(format!("regularization parameters must be >= 0, got {bad}"));
        }
        let mu_r = self.mu * self.radius;
        if mu_r > UNIQUENESS_LIMIT {
            report.warnings.push(format!(
                "mu*R = {mu_r} exceeds {UNIQUENESS_LIMIT}; uniqueness of the inversion is not guaranteed"
            ));
        }
        report
    }

    /// `validate` folded into a `Result`, dropping warnings.
    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(report.errors.join("; ")))
        }
    }
}

pub(crate) fn midpoint_radius(j: usize, radius: f64, num_radii: usize) -> f64 {
    (j as f64 + 0.5) * radius / num_radii as f64
}

fn first_non_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<usize> {
    values.into_iter().position(|v| !v.is_finite())
}

/// Emission values on the `(2M+1) x (2M+1)` grid `x = (i1, i2) R / M`.
///
/// `values[[i1 + M, i2 + M]]` is the pixel at `(i1, i2)`. Pixels with
/// `|x| >= R` are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianImage {
    half_width: usize,
    radius: f64,
    values: Array2<f64>,
}

impl CartesianImage {
    pub fn new(half_width: usize, radius: f64, mut values: Array2<f64>) -> Result<Self> {
        let side = 2 * half_width + 1;
        if half_width == 0 || !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "image needs M >= 1 and R > 0 (got M = {half_width}, R = {radius})"
            )));
        }
        if values.dim() != (side, side) {
            return Err(Error::Shape(format!(
                "image with M = {half_width} needs {side}x{side} values, got {:?}",
                values.dim()
            )));
        }
        if let Some(i) = first_non_finite(values.iter()) {
            return Err(Error::NonFinite(i));
        }
        let h = radius / half_width as f64;
        let m = half_width as f64;
        for ((a, b), v) in values.indexed_iter_mut() {
            let x = (a as f64 - m) * h;
            let y = (b as f64 - m) * h;
            if x.hypot(y) >= radius {
                *v = 0.0;
            }
        }
        Ok(CartesianImage {
            half_width,
            radius,
            values,
        })
    }

    pub fn zeros(half_width: usize, radius: f64) -> Result<Self> {
        let side = 2 * half_width + 1;
        CartesianImage::new(half_width, radius, Array2::zeros((side, side)))
    }

    /// Image from a function of the pixel position `(x, y)` in cm.
    pub fn from_fn(half_width: usize, radius: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let side = 2 * half_width + 1;
        let h = radius / half_width as f64;
        let m = half_width as f64;
        let values =
            Array2::from_shape_fn((side, side), |(a, b)| f((a as f64 - m) * h, (b as f64 - m) * h));
        CartesianImage::new(half_width, radius, values)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Pixel spacing `R / M`.
    pub fn spacing(&self) -> f64 {
        self.radius / self.half_width as f64
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Value at signed pixel index `(i1, i2)`, each in `-M..=M`.
    pub fn pixel(&self, i1: i64, i2: i64) -> f64 {
        let m = self.half_width as i64;
        self.values[[(i1 + m) as usize, (i2 + m) as usize]]
    }

    /// Position of the pixel stored at `values[[a, b]]`.
    pub fn position(&self, a: usize, b: usize) -> [f64; 2] {
        let h = self.spacing();
        let m = self.half_width as f64;
        [(a as f64 - m) * h, (b as f64 - m) * h]
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `alpha * self + beta * other` on the same grid.
    pub fn combine(&self, alpha: f64, other: &CartesianImage, beta: f64) -> Result<Self> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::Shape(format!(
                "cannot combine {:?} with {:?}",
                self.values.dim(),
                other.values.dim()
            )));
        }
        let values = &self.values * alpha + &other.values * beta;
        CartesianImage::new(self.half_width, self.radius, values)
    }
}

/// Attenuated V-line data: `values[[p, q]]` approximates the transform at
/// vertex angle `phi_p` and half opening angle `arcsin(s_q / R)`,
/// for `p < P` and `q <= Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct VSinogram {
    radius: f64,
    mu: f64,
    values: Array2<f64>,
}

impl VSinogram {
    pub fn new(radius: f64, mu: f64, values: Array2<f64>) -> Result<Self> {
        let (p, q1) = values.dim();
        if p < 2 || q1 < 3 {
            return Err(Error::Shape(format!(
                "sinogram needs P >= 2 rows and Q + 1 >= 3 columns, got {p}x{q1}"
            )));
        }
        if let Some(i) = first_non_finite(values.iter()) {
            return Err(Error::NonFinite(i));
        }
        if !(radius > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sinogram needs R > 0 and finite mu (got R = {radius}, mu = {mu})"
            )));
        }
        Ok(VSinogram { radius, mu, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn num_angles(&self) -> usize {
        self.values.nrows()
    }

    /// `Q`; the array has `Q + 1` columns.
    pub fn num_radii(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        VSinogram::new(self.radius, self.mu, &self.values * alpha)
    }

    /// Checks that `P`, `Q` and `R` agree with `cfg`.
    pub fn check_against(&self, cfg: &ScanConfig) -> Result<()> {
        if self.num_angles() != cfg.num_angles || self.num_radii() != cfg.num_radii {
            return Err(Error::Shape(format!(
                "sinogram is {}x{} but the configuration expects P = {}, Q + 1 = {}",
                self.num_angles(),
                self.num_radii() + 1,
                cfg.num_angles,
                cfg.num_radii + 1
            )));
        }
        if (self.radius - cfg.radius).abs() > 1e-12 * cfg.radius {
            return Err(Error::Shape(format!(
                "sinogram radius {} differs from configured radius {}",
                self.radius, cfg.radius
            )));
        }
        Ok(())
    }
}

/// Per-harmonic complex radial profiles, rows in wrap-around DFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicStack {
    coeffs: Array2<Complex64>,
}

impl HarmonicStack {
    pub fn new(coeffs: Array2<Complex64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::Shape("empty harmonic stack".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(HarmonicStack { coeffs })
    }

    pub fn num_angles(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    /// Coefficient of harmonic `n` in column `col`.
    pub fn get(&self, n: i64, col: usize) -> Complex64 {
        self.coeffs[[row_of_harmonic(n, self.num_angles()), col]]
    }

    /// Largest `|c[-n] - conj(c[n])|` relative to the largest coefficient.
    /// The Nyquist row is its own partner and is checked for a zero
    /// imaginary part.
    pub fn max_asymmetry(&self) -> f64 {
        let p = self.num_angles();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for row in 0..p {
            let partner = (p - row) % p;
            for col in 0..self.num_columns() {
                let d = (self.coeffs[[partner, col]] - self.coeffs[[row, col]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }
}

/// Real values on the polar grid `(phi_p, r_j)`: `values[[p, j]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarImage {
    radius: f64,
    values: Array2<f64>,
}

impl PolarImage {
    pub fn new(radius: f64, values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape("empty polar image".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!("polar image needs R > 0, got {radius}")));
        }
        if let Some(i) = first_non_finite(values.iter()) {
            return Err(Error::NonFinite(i));
        }
        Ok(PolarImage { radius, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_angles(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_radii(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn angle(&self, p: usize) -> f64 {
        2.0 * PI * p as f64 / self.num_angles() as f64
    }

    pub fn node_radius(&self, j: usize) -> f64 {
        midpoint_radius(j, self.radius, self.num_radii())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_vectors() {
        let (e, o) = unit_vector(0.0);
        assert_eq!(e, [1.0, 0.0]);
        assert_eq!(o, [-0.0, 1.0]);
        let (e, o) = unit_vector(PI / 2.0);
        assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-16);
        assert_abs_diff_eq!(o[0], -1.0, epsilon = 1e-16);
        assert_abs_diff_eq!(o[1], 0.0, epsilon = 1e-16);
        let h = 0.5f64.sqrt();
        let (e, o) = unit_vector(PI / 4.0);
        for (got, want) in e.iter().chain(&o).zip([h, h, -h, h]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn unit_vector_is_orthonormal() {
        for k in 0..1000 {
            let phi = -20.0 + 0.04 * k as f64;
            let (e, o) = unit_vector(phi);
            assert!((e[0].hypot(e[1]) - 1.0).abs() <= 1e-15);
            assert!((o[0].hypot(o[1]) - 1.0).abs() <= 1e-15);
            assert!((e[0] * o[0] + e[1] * o[1]).abs() <= 1e-15);
        }
    }

    #[test]
    fn reference_setup_has_no_warning() {
        let report = ScanConfig::reference().validate();
        assert!(report.is_ok());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn strong_attenuation_warns_but_validates() {
        let report = ScanConfig::reference().with_mu(0.2).validate();
        assert!(report.is_ok());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn odd_angle_count_is_an_error() {
        let cfg = ScanConfig::new(8.0, 0.15, 3, 100, 100, 1e-3, 0.0);
        let report = cfg.validate();
        assert!(!report.is_ok());
        assert!(cfg.check().is_err());
    }

    #[test]
    fn negative_lambda_is_an_error() {
        let mut cfg = ScanConfig::reference();
        cfg.lambda[5] = -1.0;
        assert!(!cfg.validate().is_ok());
    }

    #[test]
    fn harmonic_rows_wrap_around() {
        let p = 8;
        let ns: Vec<i64> = (0..p).map(|r| harmonic_of_row(r, p)).collect();
        assert_eq!(ns, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for r in 0..p {
            assert_eq!(row_of_harmonic(harmonic_of_row(r, p), p), r);
        }
        let cfg = ScanConfig::new(8.0, 0.15, 8, 10, 10, 0.5, 0.0);
        assert_eq!(cfg.lambda_for(0), 0.0);
        assert_eq!(cfg.lambda_for(-4), 0.5);
    }

    #[test]
    fn image_constructor_masks_the_disc() {
        let img = CartesianImage::from_fn(10, 1.0, |_, _| 1.0).unwrap();
        for ((a, b), v) in img.values().indexed_iter() {
            let [x, y] = img.position(a, b);
            if x.hypot(y) >= 1.0 {
                assert_eq!(*v, 0.0);
            } else {
                assert_eq!(*v, 1.0);
            }
        }
        // x = (10, 0) R/M lies on the circle itself
        assert_eq!(img.pixel(10, 0), 0.0);
        assert_eq!(img.pixel(9, 0), 1.0);
    }

    #[test]
    fn image_rejects_bad_shapes_and_nan() {
        assert!(matches!(
            CartesianImage::new(2, 1.0, Array2::zeros((4, 5))),
            Err(Error::Shape(_))
        ));
        let mut v = Array2::zeros((5, 5));
        v[[2, 2]] = f64::NAN;
        assert!(matches!(CartesianImage::new(2, 1.0, v), Err(Error::NonFinite(12))));
    }

    #[test]
    fn asymmetry_of_real_spectrum_is_zero() {
        let mut c = Array2::zeros((4, 1));
        c[[1, 0]] = Complex64::new(1.0, 2.0);
        c[[3, 0]] = Complex64::new(1.0, -2.0);
        c[[2, 0]] = Complex64::new(0.5, 0.0);
        assert_eq!(HarmonicStack::new(c.clone()).unwrap().max_asymmetry(), 0.0);
        c[[2, 0]] = Complex64::new(0.5, 0.25);
        assert!(HarmonicStack::new(c).unwrap().max_asymmetry() > 0.1);
    }
}
