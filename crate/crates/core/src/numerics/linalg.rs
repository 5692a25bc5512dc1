use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `A = L L^H` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: ComplexMatrix,
}

impl Cholesky {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::shape(
                "square matrix",
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        let scale = a.as_slice().iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let defect = a.hermitian_defect();
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(defect));
        }

        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &ComplexMatrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.lower[(i, i)].re.ln())
            .sum()
    }

    /// Solves `L Z = B` by forward substitution.
    pub fn solve_lower(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::shape(format!("{n} rows"), b.rows()));
        }
        let l = &self.lower;
        let mut z = b.clone();
        for col in 0..b.cols() {
            for i in 0..n {
                let mut s = z[(i, col)];
                for k in 0..i {
                    s -= l[(i, k)] * z[(k, col)];
                }
                z[(i, col)] = s / l[(i, i)].re;
            }
        }
        Ok(z)
    }

    /// Solves `L^H X = Z` by back substitution.
    pub fn solve_upper(&self, z: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim();
        if z.rows() != n {
            return Err(Error::shape(format!("{n} rows"), z.rows()));
        }
        let l = &self.lower;
        let mut x = z.clone();
        for col in 0..z.cols() {
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in (i + 1)..n {
                    s -= l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = s / l[(i, i)].re;
            }
        }
        Ok(x)
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.solve_upper(&self.solve_lower(b)?)
    }

    /// Solves `A x = b` for a single vector.
    pub fn solve_vec(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let col = ComplexMatrix::from_vec(b.len(), 1, b.to_vec())?;
        Ok(self.solve(&col)?.into_vec())
    }

    /// Explicit `L^{-1}`, for applying the whitening transform to many vectors with one gemm.
    pub fn lower_inverse(&self) -> ComplexMatrix {
        self.solve_lower(&ComplexMatrix::identity(self.dim()))
            .expect("identity has matching rows")
    }
}

/// Solves `A X = B` for Hermitian positive definite `A` without forming `A^{-1}`.
pub fn hermitian_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    Cholesky::new(a)?.solve(b)
}

/// A factor `L` with `L L^H ≈ A` for Hermitian positive *semi*definite `A`.
///
/// A diagonal load of `1e-10 · tr(A)/n` makes rank-deficient inputs factorable; the
/// resulting covariance error is far below any Monte-Carlo resolution.
pub fn psd_factor(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.rows();
    let load = 1e-10 * (a.trace().re / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut loaded = a.clone();
    loaded.add_diagonal(load);
    match Cholesky::new(&loaded) {
        Ok(c) => Ok(c.lower),
        Err(Error::NotPositiveDefinite { .. }) => {
            let min = hermitian_eigenvalues(a)?
                .first()
                .copied()
                .unwrap_or(f64::NAN);
            Err(Error::NotPositiveSemidefinite(min))
        }
        Err(e) => Err(e),
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// Runs cyclic Jacobi on the real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose
/// spectrum is that of `A` with every eigenvalue doubled.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let scale = a.as_slice().iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let m = 2 * n;
    let mut s = vec![0.0f64; m * m];
    for r in 0..n {
        for c in 0..n {
            let z = a[(r, c)];
            s[r * m + c] = z.re;
            s[(r + n) * m + (c + n)] = z.re;
            s[(r + n) * m + c] = z.im;
            s[r * m + (c + n)] = -z.im;
        }
    }
    let mut eig = jacobi_eigenvalues(&mut s, m);
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eig.into_iter().step_by(2).collect())
}

fn jacobi_eigenvalues(s: &mut [f64], n: usize) -> Vec<f64> {
    let total: f64 = s.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| s[r * n + c] * s[r * n + c])
            .sum();
        if off <= 1e-30 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = s[p * n + p];
                let aqq = s[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = s[k * n + p];
                    let akq = s[k * n + q];
                    s[k * n + p] = c * akp - sn * akq;
                    s[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = s[p * n + k];
                    let aqk = s[q * n + k];
                    s[p * n + k] = c * apk - sn * aqk;
                    s[q * n + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = complex_gaussian(n, n, &mut rng);
        let mut a = g.matmul(&g.adjoint()).unwrap();
        a.add_diagonal(0.1);
        a
    }

    /// Gauss-Jordan inverse with partial pivoting; independent of the Cholesky path.
    fn gauss_jordan_inverse(a: &ComplexMatrix) -> ComplexMatrix {
        let n = a.rows();
        let mut m = a.clone();
        let mut inv = ComplexMatrix::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| m[(x, col)].norm().partial_cmp(&m[(y, col)].norm()).unwrap())
                .unwrap();
            for k in 0..n {
                let (t1, t2) = (m[(col, k)], m[(piv, k)]);
                m[(col, k)] = t2;
                m[(piv, k)] = t1;
                let (t1, t2) = (inv[(col, k)], inv[(piv, k)]);
                inv[(col, k)] = t2;
                inv[(piv, k)] = t1;
            }
            let d = m[(col, col)];
            for k in 0..n {
                m[(col, k)] /= d;
                inv[(col, k)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = m[(r, col)];
                    for k in 0..n {
                        let (mv, iv) = (m[(col, k)], inv[(col, k)]);
                        m[(r, k)] -= f * mv;
                        inv[(r, k)] -= f * iv;
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn identity_and_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = complex_gaussian(5, 3, &mut rng);
        let x = hermitian_solve(&ComplexMatrix::identity(5), &b).unwrap();
        assert!(x.sub(&b).unwrap().frobenius_norm() < 1e-14);
        let two = ComplexMatrix::identity(5).scale(2.0);
        let x = hermitian_solve(&two, &b).unwrap();
        assert!(x.sub(&b.scale(0.5)).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn random_pd_matches_explicit_inverse() {
        let a = random_pd(6, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = complex_gaussian(6, 2, &mut rng);
        let x = hermitian_solve(&a, &b).unwrap();
        let residual = a.matmul(&x).unwrap().sub(&b).unwrap().frobenius_norm() / b.frobenius_norm();
        assert!(residual <= 1e-8);
        let oracle = gauss_jordan_inverse(&a).matmul(&b).unwrap();
        assert!(x.sub(&oracle).unwrap().frobenius_norm() < 1e-8 * oracle.frobenius_norm());
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let a = random_pd(5, 11);
        let from_eig: f64 = hermitian_eigenvalues(&a)
            .unwrap()
            .iter()
            .map(|l| l.ln())
            .sum();
        assert!((Cholesky::new(&a).unwrap().log_det() - from_eig).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let mut a = ComplexMatrix::identity(3);
        a[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(Cholesky::new(&a), Err(Error::NotHermitian(_))));
        let mut b = ComplexMatrix::identity(3);
        b[(2, 2)] = Complex64::new(-1.0, 0.0);
        assert!(matches!(
            Cholesky::new(&b),
            Err(Error::NotPositiveDefinite { index: 2, .. })
        ));
        assert!(matches!(
            psd_factor(&b),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // [[2, j], [-j, 2]] has eigenvalues 1 and 3
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let e = hermitian_eigenvalues(&a).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psd_factor_of_rank_one() {
        let v: Vec<Complex64> = (0..4)
            .map(|k| Complex64::from_polar(1.0, 0.7 * k as f64))
            .collect();
        let col = ComplexMatrix::from_vec(4, 1, v).unwrap();
        let a = col.matmul(&col.adjoint()).unwrap();
        let l = psd_factor(&a).unwrap();
        let err = l
            .matmul(&l.adjoint())
            .unwrap()
            .sub(&a)
            .unwrap()
            .frobenius_norm();
        assert!(err < 1e-8);
    }
}
