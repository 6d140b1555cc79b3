//! Analytic phantoms built from constant-intensity ellipses.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CartesianImage, ScanConfig};

/// Components must stay inside the disc of radius `R * (1 - SUPPORT_MARGIN)`.
pub const SUPPORT_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    /// Counter-clockwise rotation of the first semi-axis (radians).
    #[serde(default)]
    pub rotation: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn disc(center: [f64; 2], radius: f64, intensity: f64) -> Self {
        Ellipse {
            center,
            semi_axes: [radius, radius],
            rotation: 0.0,
            intensity,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let u = (c * dx + s * dy) / self.semi_axes[0];
        let v = (-s * dx + c * dy) / self.semi_axes[1];
        u * u + v * v <= 1.0
    }

    /// Largest distance from the origin to a boundary point.
    fn reach(&self) -> f64 {
        const STEPS: usize = 4096;
        let (s, c) = self.rotation.sin_cos();
        (0..STEPS)
            .map(|k| {
                let (st, ct) = (2.0 * PI * k as f64 / STEPS as f64).sin_cos();
                let u = self.semi_axes[0] * ct;
                let v = self.semi_axes[1] * st;
                let x = self.center[0] + c * u - s * v;
                let y = self.center[1] + s * u + c * v;
                x.hypot(y)
            })
            .fold(0.0, f64::max)
    }
}

/// A sum of ellipses; serialized as a plain JSON list of components.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EllipsePhantom {
    pub components: Vec<Ellipse>,
}

impl EllipsePhantom {
    pub fn new(components: Vec<Ellipse>) -> Self {
        EllipsePhantom { components }
    }

    /// Single disc of radius `a` centered at the origin.
    pub fn centered_disc(a: f64, intensity: f64) -> Self {
        EllipsePhantom::new(vec![Ellipse::disc([0.0, 0.0], a, intensity)])
    }

    /// Three non-overlapping discs of different sizes and intensities inside
    /// `R = 8`. Used as the standard test fixture.
    pub fn three_discs() -> Self {
        EllipsePhantom::new(vec![
            Ellipse::disc([-2.0, 1.5], 2.5, 1.0),
            Ellipse::disc([3.0, -1.0], 1.8, 0.7),
            Ellipse::disc([0.5, -4.5], 1.2, 1.5),
        ])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Rejects the first component that is degenerate or reaches beyond
    /// `R * (1 - SUPPORT_MARGIN)`.
    pub fn validate(&self, radius: f64) -> Result<()> {
        let limit = radius * (1.0 - SUPPORT_MARGIN);
        for (index, e) in self.components.iter().enumerate() {
            let finite = e.center.iter().chain(&e.semi_axes).all(|v| v.is_finite())
                && e.rotation.is_finite()
                && e.intensity.is_finite();
            if !finite || e.semi_axes.iter().any(|&a| a <= 0.0) || e.reach() >= limit {
                return Err(Error::PhantomOutside { index, limit });
            }
        }
        Ok(())
    }

    /// Exact phantom value at `(x, y)`.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.components
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum()
    }

    /// Pixel-centre sampling on the `(2M+1) x (2M+1)` grid.
    pub fn rasterize(&self, half_width: usize, radius: f64) -> Result<CartesianImage> {
        self.validate(radius)?;
        if half_width == 0 {
            return Err(Error::InvalidConfig("M must be >= 1".into()));
        }
        let side = 2 * half_width + 1;
        let h = radius / half_width as f64;
        let m = half_width as f64;
        let rows: Vec<Vec<f64>> = (0..side)
            .into_par_iter()
            .map(|a| {
                let x = (a as f64 - m) * h;
                (0..side).map(|b| self.value(x, (b as f64 - m) * h)).collect()
            })
            .collect();
        let values = Array2::from_shape_vec((side, side), rows.concat())
            .map_err(|e| Error::Shape(e.to_string()))?;
        CartesianImage::new(half_width, radius, values)
    }
}

/// Closed-form attenuated V-line transform of a disc of radius `a`
/// centered at the origin. Independent of the vertex angle `phi`.
pub fn analytic_vline_centered_disc(
    a: f64,
    intensity: f64,
    cfg: &ScanConfig,
    _phi: f64,
    psi: f64,
) -> Result<f64> {
    let radius = cfg.radius;
    if !(a > 0.0 && a < radius) {
        return Err(Error::Domain(format!("disc radius {a} must lie in (0, {radius})")));
    }
    if !(0.0..PI / 2.0).contains(&psi) {
        return Err(Error::Domain(format!("opening angle {psi} outside [0, pi/2)")));
    }
    let (sin_psi, cos_psi) = psi.sin_cos();
    let s = radius * sin_psi;
    if s >= a {
        return Ok(0.0);
    }
    let h = (a * a - s * s).sqrt();
    let mu = cfg.mu;
    if mu == 0.0 {
        return Ok(intensity * 4.0 * h);
    }
    // each branch enters the disc at R cos(psi) - h and leaves at R cos(psi) + h
    let entry = radius * cos_psi - h;
    Ok(intensity * (2.0 / mu) * (-mu * entry).exp() * -(-2.0 * mu * h).exp_m1())
}
