//! End-to-end inversion: angular FFT, per-harmonic Abel solves, inverse FFT
//! and polar-to-Cartesian resampling. Also photon-count noise, error
//! metrics and the parameter studies built on top of the pipeline.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{analyze, scale_to_abel_rhs, synthesize, DftBackend};
use crate::kernel::AbelKernelMatrix;
use crate::model::{harmonic_of_row, CartesianImage, HarmonicStack, PolarImage, ScanConfig, VSinogram};
use crate::solver::{solve_triangular, TikhonovSolver, PIVOT_TOLERANCE};

/// Regularization used for the zeroth harmonic when its direct solve hits a
/// vanishing pivot.
pub const FALLBACK_LAMBDA: f64 = 1e-12;

/// Kernel matrices for `n = 0..=P/2`; negative harmonics reuse `|n|`.
#[derive(Clone, Debug)]
pub struct KernelBank {
    mu: f64,
    radius: f64,
    num_radii: usize,
    by_abs: Vec<Arc<AbelKernelMatrix>>,
}

impl KernelBank {
    pub fn assemble(cfg: &ScanConfig) -> Result<Self> {
        cfg.check()?;
        let by_abs = (0..=cfg.num_angles as i64 / 2)
            .into_par_iter()
            .map(|n| AbelKernelMatrix::assemble(n, cfg).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelBank {
            mu: cfg.mu,
            radius: cfg.radius,
            num_radii: cfg.num_radii,
            by_abs,
        })
    }

    pub fn get(&self, n: i64) -> &AbelKernelMatrix {
        &self.by_abs[n.unsigned_abs() as usize]
    }

    fn matches(&self, cfg: &ScanConfig) -> bool {
        self.mu == cfg.mu
            && self.radius == cfg.radius
            && self.num_radii == cfg.num_radii
            && self.by_abs.len() == cfg.num_angles / 2 + 1
    }
}

#[derive(Clone, Debug)]
enum HarmonicSolver {
    Direct(Arc<AbelKernelMatrix>),
    Tikhonov(Arc<TikhonovSolver>),
}

impl HarmonicSolver {
    fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            HarmonicSolver::Direct(k) => solve_triangular(k, rhs),
            HarmonicSolver::Tikhonov(t) => t.solve(rhs),
        }
    }
}

/// Wall-clock time of each pipeline stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    /// Angular FFT of the data.
    pub analyze: Duration,
    /// Scaling and all per-harmonic solves.
    pub solve: Duration,
    /// Inverse angular FFT.
    pub synthesize: Duration,
    /// Polar to Cartesian resampling.
    pub resample: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.analyze + self.solve + self.synthesize + self.resample
    }
}

/// Everything that depends only on the configuration: kernel matrices and
/// their factorizations. Reusable across any number of data sets.
#[derive(Clone, Debug)]
pub struct ReconstructionPlan {
    cfg: ScanConfig,
    backend: DftBackend,
    bank: Arc<KernelBank>,
    solvers: Vec<HarmonicSolver>,
}

impl ReconstructionPlan {
    pub fn new(cfg: &ScanConfig) -> Result<Self> {
        let bank = Arc::new(KernelBank::assemble(cfg)?);
        Self::with_bank(cfg, bank)
    }

    /// Plan that reuses already assembled kernel matrices.
    pub fn with_bank(cfg: &ScanConfig, bank: Arc<KernelBank>) -> Result<Self> {
        cfg.check()?;
        if !bank.matches(cfg) {
            return Err(Error::InvalidConfig("kernel bank was assembled for a different configuration".into()));
        }
        // one factorization per distinct (|n|, lambda)
        let mut keys: Vec<(usize, u64)> = cfg
            .harmonics()
            .map(|n| (n.unsigned_abs() as usize, cfg.lambda_for(n).to_bits()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let factored: Vec<((usize, u64), HarmonicSolver)> = keys
            .into_par_iter()
            .map(|(abs_n, bits)| {
                let k = bank.by_abs[abs_n].clone();
                let lambda = f64::from_bits(bits);
                let solver = if lambda == 0.0 && pivots_ok(&k) {
                    HarmonicSolver::Direct(k)
                } else {
                    let lambda = if lambda == 0.0 { FALLBACK_LAMBDA } else { lambda };
                    let t = TikhonovSolver::new(&k, lambda).map_err(|e| e.at_harmonic(abs_n as i64))?;
                    HarmonicSolver::Tikhonov(Arc::new(t))
                };
                Ok(((abs_n, bits), solver))
            })
            .collect::<Result<_>>()?;
        let solvers = cfg
            .harmonics()
            .map(|n| {
                let key = (n.unsigned_abs() as usize, cfg.lambda_for(n).to_bits());
                factored
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, s)| s.clone())
                    .expect("every harmonic has a solver")
            })
            .collect();
        Ok(ReconstructionPlan {
            cfg: cfg.clone(),
            backend: DftBackend::default(),
            bank,
            solvers,
        })
    }

    pub fn with_backend(mut self, backend: DftBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn config(&self) -> &ScanConfig {
        &self.cfg
    }

    pub fn bank(&self) -> &Arc<KernelBank> {
        &self.bank
    }

    /// Scaled data harmonics `g~_n(s_q)`, `q = 0..Q-1`.
    pub fn abel_rhs(&self, sino: &VSinogram) -> Result<HarmonicStack> {
        sino.check_against(&self.cfg)?;
        scale_to_abel_rhs(&analyze(sino, self.backend), &self.cfg)
    }

    /// Image harmonics `f_n(r_j)` from scaled data harmonics.
    pub fn solve_harmonics(&self, rhs: &HarmonicStack) -> Result<HarmonicStack> {
        let (p, q) = (self.cfg.num_angles, self.cfg.num_radii);
        if rhs.coeffs().dim() != (p, q) {
            return Err(Error::Shape(format!("expected {p}x{q} right-hand sides, got {:?}", rhs.coeffs().dim())));
        }
        let rows: Vec<Vec<Complex64>> = (0..p)
            .into_par_iter()
            .map(|row| {
                let b: Vec<Complex64> = rhs.coeffs().row(row).to_vec();
                self.solvers[row]
                    .solve(&b)
                    .map_err(|e| e.at_harmonic(harmonic_of_row(row, p)))
            })
            .collect::<Result<_>>()?;
        HarmonicStack::new(Array2::from_shape_fn((p, q), |(n, j)| rows[n][j]))
    }

    pub fn reconstruct(&self, sino: &VSinogram) -> Result<CartesianImage> {
        self.reconstruct_timed(sino).map(|(img, _)| img)
    }

    pub fn reconstruct_timed(&self, sino: &VSinogram) -> Result<(CartesianImage, StageTimings)> {
        sino.check_against(&self.cfg)?;
        let mut timings = StageTimings::default();

        let start = Instant::now();
        let data = analyze(sino, self.backend);
        timings.analyze = start.elapsed();

        let start = Instant::now();
        let rhs = scale_to_abel_rhs(&data, &self.cfg)?;
        let harmonics = self.solve_harmonics(&rhs)?;
        timings.solve = start.elapsed();

        let start = Instant::now();
        let polar = synthesize(&harmonics, self.cfg.radius, self.backend)?;
        timings.synthesize = start.elapsed();

        let start = Instant::now();
        let img = resample_polar_to_cartesian(&polar, self.cfg.half_width)?;
        timings.resample = start.elapsed();

        Ok((img, timings))
    }

    /// Image from already scaled data harmonics (skips the forward FFT).
    pub fn reconstruct_from_rhs(&self, rhs: &HarmonicStack) -> Result<CartesianImage> {
        let harmonics = self.solve_harmonics(rhs)?;
        let polar = synthesize(&harmonics, self.cfg.radius, self.backend)?;
        resample_polar_to_cartesian(&polar, self.cfg.half_width)
    }
}

fn pivots_ok(k: &AbelKernelMatrix) -> bool {
    let threshold = PIVOT_TOLERANCE * k.max_abs();
    (0..k.dim()).all(|i| k.entries()[[i, i]].abs() > threshold)
}

/// One-shot reconstruction; builds a plan for `cfg` and applies it.
pub fn reconstruct(sino: &VSinogram, cfg: &ScanConfig) -> Result<CartesianImage> {
    ReconstructionPlan::new(cfg)?.reconstruct(sino)
}

/// Bilinear interpolation in `(phi, r)` onto the `(2M+1)^2` Cartesian grid,
/// periodic in the angle and clamped to `[r_0, r_{Q-1}]` radially.
pub fn resample_polar_to_cartesian(pol: &PolarImage, half_width: usize) -> Result<CartesianImage> {
    let radius = pol.radius();
    let (p, q) = pol.values().dim();
    let dphi = 2.0 * PI / p as f64;
    let dr = radius / q as f64;
    let values = pol.values();
    let sample = |x: f64, y: f64| -> f64 {
        let r = x.hypot(y);
        if r >= radius {
            return 0.0;
        }
        let u = y.atan2(x).rem_euclid(2.0 * PI) / dphi;
        let p0f = u.floor();
        let fu = u - p0f;
        let p0 = (p0f as usize) % p;
        let p1 = (p0 + 1) % p;
        let v = (r / dr - 0.5).clamp(0.0, (q - 1) as f64);
        let (j0, fv) = if q == 1 {
            (0, 0.0)
        } else {
            let j0 = (v.floor() as usize).min(q - 2);
            (j0, v - j0 as f64)
        };
        let j1 = (j0 + 1).min(q - 1);
        let at = |pp: usize| (1.0 - fv) * values[[pp, j0]] + fv * values[[pp, j1]];
        (1.0 - fu) * at(p0) + fu * at(p1)
    };
    let side = 2 * half_width + 1;
    let h = radius / half_width as f64;
    let m = half_width as f64;
    let rows: Vec<Vec<f64>> = (0..side)
        .into_par_iter()
        .map(|a| {
            let x = (a as f64 - m) * h;
            (0..side).map(|b| sample(x, (b as f64 - m) * h)).collect()
        })
        .collect();
    let grid = Array2::from_shape_vec((side, side), rows.concat()).map_err(|e| Error::Shape(e.to_string()))?;
    CartesianImage::new(half_width, radius, grid)
}

/// Photon-limited data and the counts behind it.
#[derive(Clone, Debug)]
pub struct NoisyData {
    pub sinogram: VSinogram,
    pub total_counts: u64,
    pub max_bin_count: u64,
}

/// Poisson counts with expectation `c * sino`, `c = total_counts / sum(sino)`,
/// rescaled back by `1 / c`.
pub fn poisson_noise(sino: &VSinogram, total_counts: u64, seed: u64) -> Result<NoisyData> {
    if total_counts == 0 {
        return Err(Error::Domain("total_counts must be positive".into()));
    }
    if let Some(v) = sino.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Domain(format!("sinogram has negative entry {v}")));
    }
    let sum: f64 = sino.values().sum();
    if sum <= 0.0 {
        return Err(Error::EmptySinogram);
    }
    let scale = total_counts as f64 / sum;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0u64;
    let mut max_bin = 0u64;
    let mut noisy = Array2::zeros(sino.values().dim());
    for (out, &clean) in noisy.iter_mut().zip(sino.values().iter()) {
        let mean = scale * clean;
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        total += count;
        max_bin = max_bin.max(count);
        *out = count as f64 / scale;
    }
    Ok(NoisyData {
        sinogram: VSinogram::new(sino.radius(), sino.mu(), noisy)?,
        total_counts: total,
        max_bin_count: max_bin,
    })
}

/// `|reference - a|_2 / |reference|_2` over all pixels.
pub fn relative_l2_error(a: &CartesianImage, reference: &CartesianImage) -> Result<f64> {
    if a.values().dim() != reference.values().dim() {
        return Err(Error::Shape(format!(
            "cannot compare {:?} with {:?}",
            a.values().dim(),
            reference.values().dim()
        )));
    }
    let norm = reference.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff: f64 = a
        .values()
        .iter()
        .zip(reference.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(diff.sqrt() / norm)
}

/// Reconstruction error for each `lambda` applied to every harmonic except
/// `n = 0`, which keeps `cfg`'s setting. The data analysis and the kernel
/// matrices are computed once.
pub fn lambda_sweep(
    sino: &VSinogram,
    cfg: &ScanConfig,
    lambdas: &[f64],
    reference: &CartesianImage,
) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain(format!("sweep values must be positive, got {bad}")));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("sweep values must be strictly increasing".into()));
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let bank = Arc::new(KernelBank::assemble(cfg)?);
    let lambda_0 = cfg.lambda_for(0);
    let base = ReconstructionPlan::with_bank(&cfg.with_lambda(lambdas[0], lambda_0), bank.clone())?;
    let rhs = base.abel_rhs(sino)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let plan = ReconstructionPlan::with_bank(&cfg.with_lambda(lambda, lambda_0), bank.clone())?;
            let img = plan.reconstruct_from_rhs(&rhs)?;
            Ok((lambda, relative_l2_error(&img, reference)?))
        })
        .collect()
}

/// Regularization used when reconstructing with a mismatched attenuation.
pub const MISMATCH_LAMBDA: f64 = 0.03;

/// Reconstruction error when the inversion assumes attenuation `mu` instead
/// of the value the data were generated with. Regularization is taken from
/// `cfg`.
pub fn mismatch_experiment(
    sino: &VSinogram,
    cfg: &ScanConfig,
    assumed_mu: &[f64],
    reference: &CartesianImage,
) -> Result<Vec<(f64, f64)>> {
    assumed_mu
        .iter()
        .map(|&mu| {
            let img = reconstruct(sino, &cfg.with_mu(mu))?;
            Ok((mu, relative_l2_error(&img, reference)?))
        })
        .collect()
}
