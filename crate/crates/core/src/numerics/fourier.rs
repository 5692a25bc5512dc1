//! Unitary discrete Fourier transforms between the spatial and angular domains.
//!
//! All transforms carry a `1/√n` factor per dimension, so white noise keeps its
//! statistics and Frobenius norms are preserved exactly (up to rounding).

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ComplexMatrix;

/// The `n×n` unitary DFT matrix with entries `exp(-j2πmk/n)/√n`.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |m, k| {
        // reduce the exponent first so large n keeps full phase accuracy
        let phase = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Cached pair of DFT matrices for a fixed `N_rx × N_tx` shape.
#[derive(Debug, Clone)]
pub struct Dft2 {
    f_rows: ComplexMatrix,
    f_cols: ComplexMatrix,
    f_rows_inv: ComplexMatrix,
    f_cols_inv: ComplexMatrix,
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let f_rows = dft_matrix(rows);
        let f_cols = dft_matrix(cols);
        Self {
            f_rows_inv: f_rows.adjoint(),
            f_cols_inv: f_cols.conj(),
            f_rows,
            f_cols,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.f_rows.rows(), self.f_cols.rows())
    }

    /// `F_rx X F_tx^T` (the DFT matrix is symmetric, so `F_tx^T = F_tx`).
    pub fn forward(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.check(x);
        self.f_rows
            .matmul(x)
            .and_then(|y| y.matmul(&self.f_cols))
            .expect("shape checked")
    }

    /// `F_rx^H X conj(F_tx)`, the exact inverse of [`Dft2::forward`].
    pub fn inverse(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.check(x);
        self.f_rows_inv
            .matmul(x)
            .and_then(|y| y.matmul(&self.f_cols_inv))
            .expect("shape checked")
    }

    fn check(&self, x: &ComplexMatrix) {
        assert_eq!(
            x.shape(),
            self.shape(),
            "Dft2 planned for {:?}, got {:?}",
            self.shape(),
            x.shape()
        );
    }
}

/// Unitary 2-D DFT into the angular domain.
pub fn fft2(x: &ComplexMatrix) -> ComplexMatrix {
    Dft2::new(x.rows(), x.cols()).forward(x)
}

/// Unitary inverse 2-D DFT back into the spatial domain.
pub fn ifft2(x: &ComplexMatrix) -> ComplexMatrix {
    Dft2::new(x.rows(), x.cols()).inverse(x)
}
