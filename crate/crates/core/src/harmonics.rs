//! Angular Fourier analysis and synthesis over the vertex angle, and the
//! scaling that turns data harmonics into right-hand sides of the Abel
//! systems.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{HarmonicStack, PolarImage, ScanConfig, VSinogram};

/// Relative imaginary residual tolerated when synthesizing a real field.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DftBackend {
    /// Mixed-radix / Bluestein FFT, any length.
    #[default]
    Fft,
    /// Direct `O(P^2)` summation.
    Direct,
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn direct_dft(column: &[Complex64], direction: Direction) -> Vec<Complex64> {
    let p = column.len();
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    (0..p)
        .map(|k| {
            column
                .iter()
                .enumerate()
                .map(|(l, x)| {
                    // reduce k*l mod p first to keep the phase small
                    let phase = sign * 2.0 * PI * ((k * l) % p) as f64 / p as f64;
                    x * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

/// Transforms every column of `data`; no normalization.
fn transform_columns(data: &Array2<Complex64>, direction: Direction, backend: DftBackend) -> Array2<Complex64> {
    let (p, cols) = data.dim();
    let fft = match backend {
        DftBackend::Fft => {
            let mut planner = FftPlanner::new();
            Some(match direction {
                Direction::Forward => planner.plan_fft_forward(p),
                Direction::Inverse => planner.plan_fft_inverse(p),
            })
        }
        DftBackend::Direct => None,
    };
    let columns: Vec<Vec<Complex64>> = (0..cols)
        .into_par_iter()
        .map(|c| {
            let mut buf: Vec<Complex64> = data.column(c).to_vec();
            match &fft {
                Some(fft) => {
                    fft.process(&mut buf);
                    buf
                }
                None => direct_dft(&buf, direction),
            }
        })
        .collect();
    Array2::from_shape_fn((p, cols), |(k, c)| columns[c][k])
}

/// Harmonics of each column of a real `P x K` array:
/// `c[n][q] = (1/P) sum_p x[p][q] e^{-i n phi_p}`, rows in wrap-around order.
pub fn analyze_array(values: &Array2<f64>, backend: DftBackend) -> Array2<Complex64> {
    let p = values.nrows() as f64;
    let complex = values.mapv(|v| Complex64::new(v, 0.0));
    transform_columns(&complex, Direction::Forward, backend).mapv(|c| c / p)
}

/// Fourier coefficients of the data with respect to the vertex angle.
pub fn analyze(sino: &VSinogram, backend: DftBackend) -> HarmonicStack {
    HarmonicStack::new(analyze_array(sino.values(), backend))
        .expect("DFT of finite data is finite")
}

/// Unnormalized inverse transform `sum_n c[n][j] e^{i n phi_p}`.
pub fn synthesize_complex(coeffs: &Array2<Complex64>, backend: DftBackend) -> Array2<Complex64> {
    transform_columns(coeffs, Direction::Inverse, backend)
}

/// Real field on the polar grid from a conjugate-symmetric stack whose
/// columns are the midpoint radii `r_j` of a disc of radius `radius`.
pub fn synthesize(stack: &HarmonicStack, radius: f64, backend: DftBackend) -> Result<PolarImage> {
    let asym = stack.max_asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric(asym));
    }
    let field = synthesize_complex(stack.coeffs(), backend);
    let scale = field.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let imag = field.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if scale > 0.0 && imag > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Asymmetric(imag / scale));
    }
    PolarImage::new(radius, field.mapv(|c| c.re))
}

/// Factor `exp(mu sqrt(R^2 - s^2)) / 2` applied to `g_n(arcsin(s/R))`.
pub fn abel_rhs_factor(cfg: &ScanConfig, q: usize) -> f64 {
    let s = cfg.data_radius(q);
    0.5 * (cfg.mu * (cfg.radius * cfg.radius - s * s).max(0.0).sqrt()).exp()
}

/// Scales columns `q = 0..Q` by `exp(mu sqrt(R^2 - s_q^2)) / 2` and drops
/// the column at `s_Q = R`.
pub fn scale_to_abel_rhs(stack: &HarmonicStack, cfg: &ScanConfig) -> Result<HarmonicStack> {
    let q = cfg.num_radii;
    if stack.num_columns() < q || stack.num_angles() != cfg.num_angles {
        return Err(Error::Shape(format!(
            "stack is {}x{}, need P = {} rows and at least Q = {q} columns",
            stack.num_angles(),
            stack.num_columns(),
            cfg.num_angles
        )));
    }
    let factors: Vec<f64> = (0..q).map(|j| abel_rhs_factor(cfg, j)).collect();
    let coeffs = Array2::from_shape_fn((stack.num_angles(), q), |(n, j)| {
        stack.coeffs()[[n, j]] * factors[j]
    });
    HarmonicStack::new(coeffs)
}
