//! Forward operators on Cartesian images: the attenuated V-line transform
//! by ray sampling and the exponential Radon transform.

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{unit_vector, CartesianImage, ScanConfig, VSinogram};

/// Bilinear interpolation of the pixel values at `x` (cm). Zero outside the
/// grid and outside the open disc of radius `R`.
pub fn bilinear_sample(img: &CartesianImage, x: [f64; 2]) -> f64 {
    let radius = img.radius();
    if !(x[0].hypot(x[1]) < radius) {
        return 0.0;
    }
    let m = img.half_width() as f64;
    let last = 2 * img.half_width();
    let u = x[0] / img.spacing() + m;
    let v = x[1] / img.spacing() + m;
    if !(u >= 0.0 && v >= 0.0 && u <= last as f64 && v <= last as f64) {
        return 0.0;
    }
    let a = (u.floor() as usize).min(last - 1);
    let b = (v.floor() as usize).min(last - 1);
    let fu = u - a as f64;
    let fv = v - b as f64;
    let f = img.values();
    (1.0 - fu) * ((1.0 - fv) * f[[a, b]] + fv * f[[a, b + 1]])
        + fu * ((1.0 - fv) * f[[a + 1, b]] + fv * f[[a + 1, b + 1]])
}

/// Per-sample weights `h * exp(-mu * j * h)` for a branch of `2M + 1`
/// samples with step `h = R / M`.
fn branch_weights(img: &CartesianImage, mu: f64) -> Vec<f64> {
    let h = img.spacing();
    (0..=2 * img.half_width())
        .map(|j| h * (-mu * j as f64 * h).exp())
        .collect()
}

fn vline_with_weights(img: &CartesianImage, weights: &[f64], phi: f64, psi: f64) -> f64 {
    let h = img.spacing();
    let (vertex, _) = unit_vector(phi);
    let vertex = [img.radius() * vertex[0], img.radius() * vertex[1]];
    let mut total = 0.0;
    for sigma in [1.0, -1.0] {
        let (dir, _) = unit_vector(phi - sigma * psi);
        for (j, w) in weights.iter().enumerate() {
            let r = j as f64 * h;
            let x = [vertex[0] - r * dir[0], vertex[1] - r * dir[1]];
            total += w * bilinear_sample(img, x);
        }
    }
    total
}

/// Attenuated V-line integral with vertex `R Phi(phi)` and half opening
/// angle `psi`. Each branch is sampled at `2M + 1` points spaced `R / M`
/// starting at the vertex.
pub fn vline_value(img: &CartesianImage, mu: f64, phi: f64, psi: f64) -> f64 {
    vline_with_weights(img, &branch_weights(img, mu), phi, psi)
}

/// Simulated data `P x (Q + 1)` for every vertex angle `phi_p` and opening
/// angle `psi_q = arcsin(s_q / R)`, `q = 0..=Q`.
pub fn forward_vline(img: &CartesianImage, cfg: &ScanConfig) -> Result<VSinogram> {
    cfg.check()?;
    if img.half_width() != cfg.half_width || (img.radius() - cfg.radius).abs() > 1e-12 * cfg.radius {
        return Err(Error::Shape(format!(
            "image (M = {}, R = {}) does not match configuration (M = {}, R = {})",
            img.half_width(),
            img.radius(),
            cfg.half_width,
            cfg.radius
        )));
    }
    let weights = branch_weights(img, cfg.mu);
    let q1 = cfg.num_radii + 1;
    let psis: Vec<f64> = (0..q1).map(|q| cfg.opening_angle(q)).collect();
    let rows: Vec<Vec<f64>> = (0..cfg.num_angles)
        .into_par_iter()
        .map(|p| {
            let phi = cfg.vertex_angle(p);
            psis.iter()
                .map(|&psi| vline_with_weights(img, &weights, phi, psi))
                .collect()
        })
        .collect();
    let values = Array2::from_shape_vec((cfg.num_angles, q1), rows.concat())
        .map_err(|e| Error::Shape(e.to_string()))?;
    VSinogram::new(cfg.radius, cfg.mu, values)
}

/// Midpoint-rule exponential Radon transform
/// `int f(s Phi(alpha) + t Phi(alpha)^perp) e^{nu t} dt` over the chord of
/// the disc. Zero for `|s| >= R`.
pub fn forward_exponential_radon(
    img: &CartesianImage,
    nu: f64,
    alpha: f64,
    s: f64,
    n_samples: usize,
) -> f64 {
    let radius = img.radius();
    if s.abs() >= radius || n_samples == 0 {
        return 0.0;
    }
    let half = (radius * radius - s * s).sqrt();
    let dt = 2.0 * half / n_samples as f64;
    let (normal, along) = unit_vector(alpha);
    (0..n_samples)
        .map(|k| {
            let t = -half + (k as f64 + 0.5) * dt;
            let x = [s * normal[0] + t * along[0], s * normal[1] + t * along[1]];
            bilinear_sample(img, x) * (nu * t).exp()
        })
        .sum::<f64>()
        * dt
}

/// The V-line value and its expression as two weighted exponential Radon
/// transforms, both by quadrature.
pub fn radon_decomposition(img: &CartesianImage, mu: f64, phi: f64, psi: f64, n_samples: usize) -> (f64, f64) {
    let radius = img.radius();
    let vline = vline_value(img, mu, phi, psi);
    let (sin_psi, cos_psi) = psi.sin_cos();
    let composed = (-radius * mu * cos_psi).exp()
        * [1.0, -1.0]
            .iter()
            .map(|sigma| {
                forward_exponential_radon(
                    img,
                    -mu,
                    FRAC_PI_2 + phi - sigma * psi,
                    sigma * radius * sin_psi,
                    n_samples,
                )
            })
            .sum::<f64>();
    (vline, composed)
}

/// Absolute gap between the V-line value and its exponential Radon
/// decomposition.
pub fn radon_decomposition_gap(img: &CartesianImage, cfg: &ScanConfig, phi: f64, psi: f64, n_samples: usize) -> f64 {
    let (vline, composed) = radon_decomposition(img, cfg.mu, phi, psi, n_samples);
    (vline - composed).abs()
}
