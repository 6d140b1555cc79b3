//! Dense linear algebra for the per-harmonic systems: triangular
//! substitution, Tikhonov-regularized normal equations via Cholesky, and
//! one-sided Jacobi singular values for conditioning diagnostics.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::AbelKernelMatrix;

/// Diagonal entries below this fraction of `max |K|` count as zero pivots.
pub const PIVOT_TOLERANCE: f64 = 1e-12;
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Triangle {
    Upper,
    Lower,
}

fn triangle_of(a: ArrayView2<f64>) -> Result<Triangle> {
    let n = a.nrows();
    let upper = (0..n).all(|i| (0..i).all(|j| a[[i, j]] == 0.0));
    if upper {
        return Ok(Triangle::Upper);
    }
    let lower = (0..n).all(|i| (i + 1..n).all(|j| a[[i, j]] == 0.0));
    if lower {
        return Ok(Triangle::Lower);
    }
    Err(Error::Shape("matrix is not triangular".into()))
}

/// Solves `K x = rhs` by substitution in whichever triangle `K` occupies
/// (back substitution for the upper triangular kernel matrices).
pub fn solve_triangular(k: &AbelKernelMatrix, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    solve_triangular_dense(k.entries(), rhs, PIVOT_TOLERANCE)
}

pub fn solve_triangular_dense(a: &Array2<f64>, rhs: &[Complex64], pivot_tol: f64) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || rhs.len() != n {
        return Err(Error::Shape(format!(
            "triangular solve with matrix {:?} and right-hand side of length {}",
            a.dim(),
            rhs.len()
        )));
    }
    let threshold = pivot_tol * a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    for row in 0..n {
        let pivot = a[[row, row]];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularPivot { row, pivot });
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    match triangle_of(a.view())? {
        Triangle::Upper => {
            for row in (0..n).rev() {
                let acc: Complex64 = (row + 1..n).map(|j| x[j] * a[[row, j]]).sum();
                x[row] = (rhs[row] - acc) / a[[row, row]];
            }
        }
        Triangle::Lower => {
            for row in 0..n {
                let acc: Complex64 = (0..row).map(|j| x[j] * a[[row, j]]).sum();
                x[row] = (rhs[row] - acc) / a[[row, row]];
            }
        }
    }
    Ok(x)
}

/// Lower triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Shape(format!("Cholesky of non-square {:?}", a.dim())));
        }
        let mut lower = Array2::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= lower[[j, k]] * lower[[j, k]];
            }
            if !(diag > 0.0) {
                return Err(Error::NotPositiveDefinite { row: j, pivot: diag });
            }
            let d = diag.sqrt();
            lower[[j, j]] = d;
            for i in j + 1..n {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= lower[[i, k]] * lower[[j, k]];
                }
                lower[[i, j]] = v / d;
            }
        }
        Ok(Cholesky { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= l[[i, k]] * b[k];
            }
            b[i] = v / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in i + 1..n {
                v -= l[[k, i]] * b[k];
            }
            b[i] = v / l[[i, i]];
        }
    }
}

/// Factorized Tikhonov system `(K^T K + lambda I) x = K^T g` for one kernel
/// matrix, reusable for any number of right-hand sides.
#[derive(Clone, Debug)]
pub struct TikhonovSolver {
    matrix: Array2<f64>,
    lambda: f64,
    factor: Cholesky,
}

impl TikhonovSolver {
    pub fn new(k: &AbelKernelMatrix, lambda: f64) -> Result<Self> {
        Self::from_dense(k.entries().clone(), lambda)
    }

    pub fn from_dense(matrix: Array2<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("regularization parameter must be >= 0, got {lambda}")));
        }
        let mut normal = matrix.t().dot(&matrix);
        for i in 0..normal.nrows() {
            normal[[i, i]] += lambda;
        }
        let factor = Cholesky::factor(&normal)?;
        Ok(TikhonovSolver { matrix, lambda, factor })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve_real(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if rhs.len() != n {
            return Err(Error::Shape(format!("right-hand side of length {} for {n} rows", rhs.len())));
        }
        let mut b: Vec<f64> = (0..self.matrix.ncols())
            .map(|j| (0..n).map(|i| self.matrix[[i, j]] * rhs[i]).sum())
            .collect();
        self.factor.solve_in_place(&mut b);
        Ok(b)
    }

    /// Real and imaginary parts solved against the same factorization.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = rhs.iter().map(|c| c.re).collect();
        let im: Vec<f64> = rhs.iter().map(|c| c.im).collect();
        let re = self.solve_real(&re)?;
        let im = self.solve_real(&im)?;
        Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
    }
}

/// Minimizer of `|K x - rhs|^2 + lambda |x|^2`.
pub fn solve_tikhonov(k: &AbelKernelMatrix, rhs: &[Complex64], lambda: f64) -> Result<Vec<Complex64>> {
    TikhonovSolver::new(k, lambda)?.solve(rhs)
}

/// Singular values in descending order by one-sided Jacobi rotations.
pub fn singular_values_dense(a: &Array2<f64>) -> Result<Vec<f64>> {
    // orthogonalize the columns of the taller orientation
    let mut work = if a.nrows() >= a.ncols() { a.clone() } else { a.t().to_owned() };
    let (rows, cols) = work.dim();
    let mut off = f64::INFINITY;
    for _ in 0..JACOBI_MAX_SWEEPS {
        off = 0.0;
        for i in 0..cols {
            for j in i + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..rows {
                    let (x, y) = (work[[r, i]], work[[r, j]]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                off = off.max(rel);
                if rel < JACOBI_TOLERANCE {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (work[[r, i]], work[[r, j]]);
                    work[[r, i]] = c * x - s * y;
                    work[[r, j]] = s * x + c * y;
                }
            }
        }
        if off < JACOBI_TOLERANCE {
            let mut sv: Vec<f64> = (0..cols)
                .map(|j| (0..rows).map(|r| work[[r, j]] * work[[r, j]]).sum::<f64>().sqrt())
                .collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            return Ok(sv);
        }
    }
    Err(Error::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
        off,
    })
}

pub fn singular_values(k: &AbelKernelMatrix) -> Result<Vec<f64>> {
    singular_values_dense(k.entries())
}

/// `sigma_max / sigma_min`; infinite when the smallest singular value is 0.
pub fn condition_number_dense(a: &Array2<f64>) -> Result<f64> {
    let sv = singular_values_dense(a)?;
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

pub fn condition_number(k: &AbelKernelMatrix) -> Result<f64> {
    condition_number_dense(k.entries())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScanConfig;
    use ndarray::array;

    fn kernel(entries: Array2<f64>) -> AbelKernelMatrix {
        AbelKernelMatrix::from_entries(0, 0.0, 1.0, entries).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn matvec(a: &Array2<f64>, x: &[Complex64]) -> Vec<Complex64> {
        (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| x[j] * a[[i, j]]).sum())
            .collect()
    }

    #[test]
    fn identity_solve() {
        let rhs = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5), c(4.0)];
        let x = solve_triangular(&kernel(Array2::eye(3)), &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn hand_substitution() {
        let x = solve_triangular(&kernel(array![[2.0, 1.0], [0.0, 4.0]]), &[c(5.0), c(8.0)]).unwrap();
        assert_eq!(x, vec![c(1.5), c(2.0)]);
        let x = solve_triangular_dense(&array![[2.0, 0.0], [1.0, 4.0]], &[c(2.0), c(9.0)], PIVOT_TOLERANCE)
            .unwrap();
        assert_eq!(x, vec![c(1.0), c(2.0)]);
    }

    #[test]
    fn tiny_pivot_names_the_row() {
        let mut a: Array2<f64> = Array2::eye(5);
        a[[0, 4]] = 1.0;
        a[[3, 3]] = 1e-15;
        match solve_triangular(&kernel(a), &[c(1.0); 5]) {
            Err(Error::SingularPivot { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_matrix_is_not_triangular() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(
            solve_triangular_dense(&a, &[c(1.0), c(1.0)], PIVOT_TOLERANCE),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tikhonov_with_identity_halves() {
        let rhs = vec![Complex64::new(2.0, -4.0), c(6.0), Complex64::new(0.0, 1.0)];
        let x = solve_tikhonov(&kernel(Array2::eye(3)), &rhs, 1.0).unwrap();
        for (a, b) in x.iter().zip(&rhs) {
            assert!((a - b / 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn unregularized_tikhonov_matches_substitution() {
        let cfg = ScanConfig::new(8.0, 0.15, 4, 12, 10, 0.0, 0.0);
        let k = AbelKernelMatrix::assemble(0, &cfg).unwrap();
        let rhs: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64 * 0.3 - 1.0, (i as f64).sin())).collect();
        let a = solve_triangular(&k, &rhs).unwrap();
        let b = solve_tikhonov(&k, &rhs, 0.0).unwrap();
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() <= 1e-8 * scale);
        }
        let back = matvec(k.entries(), &a);
        let rn = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let res = back.iter().zip(&rhs).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-9 * rn);
    }

    #[test]
    fn large_lambda_shrinks_solution() {
        let cfg = ScanConfig::new(8.0, 0.15, 4, 10, 10, 0.0, 0.0);
        let k = AbelKernelMatrix::assemble(3, &cfg).unwrap();
        let rhs: Vec<Complex64> = (0..10).map(|i| c(1.0 + i as f64)).collect();
        let ktg: f64 = matvec(&k.entries().t().to_owned(), &rhs)
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        for lambda in [1e2, 1e4, 1e6] {
            let x = solve_tikhonov(&k, &rhs, lambda).unwrap();
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm <= ktg / lambda * (1.0 + 1e-12));
        }
    }

    #[test]
    fn negative_lambda_and_singular_normal_matrix_fail() {
        let k = kernel(Array2::eye(2));
        assert!(matches!(solve_tikhonov(&k, &[c(1.0), c(1.0)], -1.0), Err(Error::Domain(_))));
        let singular = kernel(array![[1.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(
            solve_tikhonov(&singular, &[c(1.0), c(1.0)], 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn diagonal_singular_values() {
        let a = Array2::from_diag(&ndarray::arr1(&[3.0, 1.0, 2.0]));
        assert_eq!(singular_values_dense(&a).unwrap(), vec![3.0, 2.0, 1.0]);
        assert_eq!(condition_number_dense(&Array2::eye(4)).unwrap(), 1.0);
        let b = Array2::from_diag(&ndarray::arr1(&[10.0, 0.1]));
        assert!((condition_number_dense(&b).unwrap() - 100.0).abs() < 1e-12);
        let z = Array2::from_diag(&ndarray::arr1(&[1.0, 0.0]));
        assert_eq!(condition_number_dense(&z).unwrap(), f64::INFINITY);
    }

    #[test]
    fn condition_number_is_scale_invariant() {
        let cfg = ScanConfig::new(8.0, 0.15, 4, 20, 10, 0.0, 0.0);
        let k = AbelKernelMatrix::assemble(2, &cfg).unwrap();
        let a = condition_number(&k).unwrap();
        let b = condition_number_dense(&(k.entries() * 37.5)).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
    }
}
