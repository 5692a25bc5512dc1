//! Complex matrices, unitary Fourier transforms, Hermitian solves and Gaussian sampling.

mod fourier;
mod linalg;
mod matrix;
mod random;

pub use fourier::{dft_matrix, fft2, ifft2, Dft2};
pub use linalg::{hermitian_eigenvalues, hermitian_solve, psd_factor, Cholesky};
pub use matrix::{ComplexMatrix, RealTensor4};
pub use random::{complex_gaussian, standard_complex, stream_rng};
