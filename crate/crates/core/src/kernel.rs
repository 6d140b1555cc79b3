//! Kernels of the generalized Abel equations linking image and data
//! harmonics, product-integration weights, and the per-harmonic triangular
//! matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{midpoint_radius, ScanConfig};

/// Slack allowed on Chebyshev arguments before they count as out of domain.
pub const CHEBYSHEV_SLACK: f64 = 1e-12;

fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `sigma^n` for `sigma = +-1`, any integer `n`.
fn sigma_pow(sigma: f64, n: i64) -> f64 {
    if sigma > 0.0 {
        1.0
    } else {
        parity(n)
    }
}

/// Chebyshev polynomial of the first kind, `T_k(z) = cos(k arccos z)`,
/// by the three-term recurrence.
pub fn chebyshev_t(k: u32, z: f64) -> Result<f64> {
    if !(z.abs() <= 1.0 + CHEBYSHEV_SLACK) {
        return Err(Error::Domain(format!("Chebyshev argument {z} outside [-1, 1]")));
    }
    let z = z.clamp(-1.0, 1.0);
    let (mut prev, mut cur) = (1.0, z);
    if k == 0 {
        return Ok(prev);
    }
    for _ in 1..k {
        let next = 2.0 * z * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

fn check_pair(s: f64, r: f64, radius: f64) -> Result<()> {
    if !(s >= 0.0 && s <= r && r <= radius) {
        return Err(Error::Domain(format!(
            "kernel needs 0 <= s <= r <= R, got s = {s}, r = {r}, R = {radius}"
        )));
    }
    Ok(())
}

/// `K_n(s, r) = sum_sigma sigma^n e^{sigma mu sqrt(r^2 - s^2)}
///   cos(n (arcsin(s/r) - sigma arcsin(s/R)))`.
pub fn kernel_k(n: i64, s: f64, r: f64, mu: f64, radius: f64) -> Result<f64> {
    check_pair(s, r, radius)?;
    let root = (r * r - s * s).sqrt();
    let inner = if r > 0.0 { (s / r).min(1.0).asin() } else { 0.0 };
    let outer = (s / radius).asin();
    let nf = n as f64;
    Ok([1.0, -1.0]
        .iter()
        .map(|&sigma| {
            sigma_pow(sigma, n) * (sigma * mu * root).exp() * (nf * (inner - sigma * outer)).cos()
        })
        .sum())
}

/// The same kernel written with Chebyshev polynomials:
/// `sum_sigma sigma^n e^{sigma mu sqrt(r^2-s^2)}
///   T_n((sqrt(r^2-s^2) sqrt(R^2-s^2) + sigma s^2) / (r R))`.
pub fn kernel_k_chebyshev(n: i64, s: f64, r: f64, mu: f64, radius: f64) -> Result<f64> {
    check_pair(s, r, radius)?;
    if r == 0.0 {
        return kernel_k(n, s, r, mu, radius);
    }
    let root = (r * r - s * s).sqrt();
    let outer_root = (radius * radius - s * s).sqrt();
    let k = n.unsigned_abs() as u32;
    let mut total = 0.0;
    for sigma in [1.0, -1.0] {
        let arg = (root * outer_root + sigma * s * s) / (r * radius);
        total += sigma_pow(sigma, n) * (sigma * mu * root).exp() * chebyshev_t(k, arg)?;
    }
    Ok(total)
}

/// `|trig form - Chebyshev form|` of `K_n(s, r)`.
pub fn kernel_form_crosscheck(n: i64, s: f64, r: f64, mu: f64, radius: f64) -> Result<f64> {
    Ok((kernel_k(n, s, r, mu, radius)? - kernel_k_chebyshev(n, s, r, mu, radius)?).abs())
}

/// Kernel in the substituted variables `t, rho` on `0 <= rho <= t <= 1`:
/// `1/2 sum_sigma sigma^n e^{sigma mu R sqrt(t - rho)}
///   T_n((sqrt(t) sqrt(t - rho) + sigma (1 - t)) / sqrt(1 - rho))`.
pub fn kernel_k_hat(n: i64, t: f64, rho: f64, mu: f64, radius: f64) -> Result<f64> {
    if !(0.0 <= rho && rho <= t && t <= 1.0 && rho < 1.0) {
        return Err(Error::Domain(format!(
            "substituted kernel needs 0 <= rho <= t <= 1, rho < 1 (t = {t}, rho = {rho})"
        )));
    }
    let d = t - rho;
    let root_d = d.sqrt();
    let root_rest = (1.0 - rho).sqrt();
    let k = n.unsigned_abs() as u32;
    let mut total = 0.0;
    for sigma in [1.0, -1.0] {
        // 1 - t = (1 - rho) - d, so the argument equals
        // sigma sqrt(1 - rho) + (sqrt(t) sqrt(d) - sigma d) / sqrt(1 - rho);
        // on the diagonal d = 0 this is exactly sigma sqrt(1 - t)
        let arg = sigma * root_rest + (t.sqrt() * root_d - sigma * d) / root_rest;
        total += sigma_pow(sigma, n) * (sigma * mu * radius * root_d).exp() * chebyshev_t(k, arg)?;
    }
    Ok(0.5 * total)
}

/// Diagonal of the substituted kernel, `k_n(t) = T_n(sqrt(1 - t))`.
pub fn kernel_diagonal(n: i64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    chebyshev_t(n.unsigned_abs() as u32, (1.0 - t).sqrt())
}

/// Product-integration weight
/// `w_{q,j} = int_{s_j}^{s_{j+1}} r / sqrt(r^2 - s_q^2) dr`, zero for `j < q`.
pub fn weight_w(q: usize, j: usize, radius: f64, num_radii: usize) -> f64 {
    if j < q {
        return 0.0;
    }
    let (q, j) = (q as f64, j as f64);
    let upper = ((j + 1.0) * (j + 1.0) - q * q).sqrt();
    let lower = (j * j - q * q).sqrt();
    radius / num_radii as f64 * (upper - lower)
}

/// `Q x Q` upper triangular matrix `w_{q,j} K_n(s_q, r_j)` for one harmonic.
#[derive(Clone, Debug, PartialEq)]
pub struct AbelKernelMatrix {
    n: i64,
    mu: f64,
    radius: f64,
    entries: Array2<f64>,
}

impl AbelKernelMatrix {
    pub fn assemble(n: i64, cfg: &ScanConfig) -> Result<Self> {
        let q = cfg.num_radii;
        let mut entries = Array2::zeros((q, q));
        for row in 0..q {
            let s = cfg.data_radius(row);
            for col in row..q {
                let r = midpoint_radius(col, cfg.radius, q);
                entries[[row, col]] =
                    weight_w(row, col, cfg.radius, q) * kernel_k(n, s, r, cfg.mu, cfg.radius)?;
            }
        }
        Ok(AbelKernelMatrix {
            n,
            mu: cfg.mu,
            radius: cfg.radius,
            entries,
        })
    }

    pub fn from_entries(n: i64, mu: f64, radius: f64, entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(Error::Shape(format!("kernel matrix must be square, got {:?}", entries.dim())));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(AbelKernelMatrix { n, mu, radius, entries })
    }

    /// Same entries relabelled as harmonic `n`; valid for `-n` since the
    /// kernel is even in `n`.
    pub fn relabel(&self, n: i64) -> Self {
        AbelKernelMatrix { n, ..self.clone() }
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chebyshev_values() {
        for z in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(chebyshev_t(0, z).unwrap(), 1.0);
            assert_eq!(chebyshev_t(1, z).unwrap(), z);
        }
        assert_eq!(chebyshev_t(2, 0.5).unwrap(), -0.5);
        let theta = 0.3f64;
        assert!((chebyshev_t(5, theta.cos()).unwrap() - (5.0 * theta).cos()).abs() < 1e-13);
        assert_eq!(chebyshev_t(3, 1.0 + 1e-13).unwrap(), 1.0);
        assert!(matches!(chebyshev_t(3, 1.0 + 1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn chebyshev_matches_cosine_definition() {
        for k in 0..64u32 {
            for i in 0..=50 {
                let z = -1.0 + 2.0 * i as f64 / 50.0;
                let want = (k as f64 * z.acos()).cos();
                assert!((chebyshev_t(k, z).unwrap() - want).abs() < 1e-11, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn zeroth_kernel_is_hyperbolic_cosine() {
        let v = kernel_k(0, 3.0, 5.0, 0.15, 8.0).unwrap();
        assert!((v - 2.0 * 0.6f64.cosh()).abs() < 1e-14);
        assert!((v - 2.37093).abs() < 1e-5);
        for (s, r) in [(0.0, 1.0), (2.0, 7.5), (4.0, 4.0)] {
            assert_eq!(kernel_k(0, s, r, 0.0, 8.0).unwrap(), 2.0);
        }
    }

    #[test]
    fn kernel_at_zero_offset() {
        // brute force: at s = 0 both cosines are 1, leaving
        // e^{mu r} + (-1)^n e^{-mu r}
        let (mu, r) = (0.15f64, 5.0f64);
        for n in -6i64..=6 {
            let want = (mu * r).exp() + parity(n) * (-mu * r).exp();
            assert!((kernel_k(n, 0.0, r, mu, 8.0).unwrap() - want).abs() < 1e-14);
        }
        assert!((kernel_k(1, 0.0, r, mu, 8.0).unwrap() - 2.0 * (mu * r).sinh()).abs() < 1e-14);
        assert!((kernel_k(2, 0.0, r, mu, 8.0).unwrap() - 2.0 * (mu * r).cosh()).abs() < 1e-14);
    }

    #[test]
    fn kernel_rejects_s_beyond_r() {
        assert!(matches!(kernel_k(1, 3.0, 2.0, 0.15, 8.0), Err(Error::Domain(_))));
        assert!(kernel_k_hat(1, 0.2, 0.3, 0.15, 8.0).is_err());
    }

    #[test]
    fn substituted_kernel_values() {
        assert!(kernel_k_hat(2, 0.5, 0.5, 0.15, 8.0).unwrap().abs() < 1e-15);
        let v = kernel_k_hat(0, 0.5, 0.1, 0.15, 8.0).unwrap();
        assert!((v - (1.2 * 0.4f64.sqrt()).cosh()).abs() < 1e-14);
        assert!((v - 1.302092168391271).abs() < 1e-12);
        for t in [0.0, 0.3, 0.9] {
            let v = kernel_k_hat(1, t, t, 0.0, 8.0).unwrap();
            assert_eq!(v, (1.0 - t).sqrt());
        }
    }

    #[test]
    fn diagonal_law_on_dense_grid() {
        let mut worst = 0.0f64;
        for n in 0..=64 {
            for i in 0..1000 {
                let t = i as f64 / 1000.0;
                let d = (kernel_k_hat(n, t, t, 0.15, 8.0).unwrap() - kernel_diagonal(n, t).unwrap()).abs();
                worst = worst.max(d);
            }
        }
        assert!(worst <= 1e-13, "{worst}");
    }

    #[test]
    fn weights() {
        for j in 0..10 {
            assert!((weight_w(0, j, 8.0, 10) - 0.8).abs() < 1e-15);
        }
        assert!((weight_w(1, 2, 1.0, 4) - (8f64.sqrt() - 3f64.sqrt()) / 4.0).abs() < 1e-15);
        assert!((weight_w(1, 2, 1.0, 4) - 0.2740940792943283).abs() < 1e-15);
        for q in 0..10 {
            let want = 0.8 * ((2 * q + 1) as f64).sqrt();
            assert!((weight_w(q, q, 8.0, 10) - want).abs() < 1e-14);
            assert_eq!(weight_w(q + 1, q, 8.0, 10), 0.0);
        }
    }

    #[test]
    fn weights_telescope() {
        let (radius, q_max) = (8.0, 100);
        for q in 0..q_max {
            let sum: f64 = (q..q_max).map(|j| weight_w(q, j, radius, q_max)).sum();
            let s = q as f64 * radius / q_max as f64;
            assert!((sum - (radius * radius - s * s).sqrt()).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn unattenuated_zeroth_matrix_is_twice_the_weights() {
        let cfg = ScanConfig::new(8.0, 0.0, 10, 12, 10, 1e-3, 0.0);
        let k = AbelKernelMatrix::assemble(0, &cfg).unwrap();
        for ((q, j), v) in k.entries().indexed_iter() {
            assert_eq!(*v, 2.0 * weight_w(q, j, 8.0, 12));
        }
    }

    #[test]
    fn matrices_are_upper_triangular_and_bounded() {
        let cfg = ScanConfig::new(8.0, 0.15, 20, 16, 10, 1e-3, 0.0);
        let bound = 2.0 * (cfg.mu * cfg.radius).exp();
        for n in cfg.harmonics() {
            let k = AbelKernelMatrix::assemble(n, &cfg).unwrap();
            for q in 0..16 {
                let wmax = (0..16).map(|j| weight_w(q, j, 8.0, 16)).fold(0.0, f64::max);
                for j in 0..16 {
                    let v = k.entries()[[q, j]];
                    if j < q {
                        assert_eq!(v, 0.0);
                    }
                    assert!(v.abs() <= bound * wmax);
                }
            }
        }
    }

    #[test]
    fn matrices_are_even_in_n() {
        let cfg = ScanConfig::new(7.3, 0.11, 20, 30, 10, 1e-3, 0.0);
        let a = AbelKernelMatrix::assemble(7, &cfg).unwrap();
        let b = AbelKernelMatrix::assemble(-7, &cfg).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert!((x - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn crosscheck_endpoints() {
        assert!(kernel_form_crosscheck(0, 2.0, 5.0, 0.15, 8.0).unwrap() < 1e-15);
        for n in 0..20 {
            assert!(kernel_form_crosscheck(n, 0.0, 3.0, 0.15, 8.0).unwrap() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn trig_and_chebyshev_forms_agree(
            n in -50i64..=50,
            r in 1e-3f64..8.0,
            frac in 0.0f64..1.0,
        ) {
            let s = r * frac;
            prop_assert!(kernel_form_crosscheck(n, s, r, 0.15, 8.0).unwrap() <= 1e-10);
        }

        #[test]
        fn kernel_is_even_and_bounded(n in 0i64..60, r in 1e-3f64..8.0, frac in 0.0f64..1.0) {
            let s = r * frac;
            let a = kernel_k(n, s, r, 0.15, 8.0).unwrap();
            let b = kernel_k(-n, s, r, 0.15, 8.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-13);
            prop_assert!(a.abs() <= 2.0 * (0.15 * (r * r - s * s).sqrt()).exp() + 1e-12);
        }
    }
}
