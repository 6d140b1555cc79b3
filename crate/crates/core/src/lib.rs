//! Simulation and inversion of the attenuated V-line transform.
//!
//! The transform integrates an emission distribution supported in a disc
//! of radius `R` over V-shaped lines whose vertex sits on the boundary
//! circle, weighting each branch with `exp(-mu r)`. Inversion expands data
//! and image in circular harmonics; each harmonic pair is linked by a
//! generalized Abel equation that is discretized by product integration
//! and solved with Tikhonov regularization.
//!
//! ```no_run
//! use vline_core::{forward_vline, reconstruct, relative_l2_error, EllipsePhantom, ScanConfig};
//!
//! let cfg = ScanConfig::reference();
//! let truth = EllipsePhantom::three_discs().rasterize(cfg.half_width, cfg.radius)?;
//! let data = forward_vline(&truth, &cfg)?;
//! let recon = reconstruct(&data, &cfg)?;
//! println!("relative error {}", relative_l2_error(&recon, &truth)?);
//! # Ok::<(), vline_core::Error>(())
//! ```

pub mod container;
pub mod error;
pub mod harmonics;
pub mod kernel;
pub mod model;
pub mod phantom;
pub mod projector;
pub mod recon;
pub mod solver;

pub use container::{export_pgm, load_container, save_container, Container};
pub use error::{Error, Result};
pub use harmonics::{analyze, scale_to_abel_rhs, synthesize, DftBackend};
pub use kernel::{chebyshev_t, kernel_k, kernel_k_hat, weight_w, AbelKernelMatrix};
pub use model::{unit_vector, CartesianImage, HarmonicStack, PolarImage, ScanConfig, VSinogram, ValidationReport};
pub use phantom::{analytic_vline_centered_disc, Ellipse, EllipsePhantom};
pub use projector::{bilinear_sample, forward_exponential_radon, forward_vline, radon_decomposition_gap};
pub use recon::{
    lambda_sweep, mismatch_experiment, poisson_noise, reconstruct, relative_l2_error,
    resample_polar_to_cartesian, KernelBank, NoisyData, ReconstructionPlan, StageTimings,
};
pub use solver::{condition_number, singular_values, solve_tikhonov, solve_triangular, TikhonovSolver};
