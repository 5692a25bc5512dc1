use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} entries for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Inverse of [`ComplexMatrix::vec`]: rebuilds a matrix from its column-major stacking.
    pub fn from_column_vec(rows: usize, cols: usize, v: &[Complex64]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::shape(rows * cols, v.len()));
        }
        Ok(Self::from_fn(rows, cols, |r, c| v[c * rows + r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Column-major stacking `vec(H)`.
    pub fn vec(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self[(r, c)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`, in place.
    pub fn axpy_mut(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                format!("inner dimension {}", self.cols),
                other.rows,
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        zgemm(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            &other.data,
            &mut out.data,
        );
        Ok(out)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = other.shape();
        Self::from_fn(self.rows * p, self.cols * q, |r, c| {
            self[(r / p, c / q)] * other[(r % p, c % q)]
        })
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces the matrix by `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for r in 0..n {
            for c in r..n {
                let avg = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                self[(r, c)] = avg;
                self[(c, r)] = avg.conj();
            }
        }
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// `c = a · b` for row-major `a: m×k`, `b: k×n`.
pub(crate) fn zgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    b: &[Complex64],
    c: &mut [Complex64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        return;
    }
    // SAFETY: Complex64 is #[repr(C)] { re, im }, layout-identical to [f64; 2];
    // slice lengths are checked above and strides describe dense row-major storage.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Real/imaginary stacked 4-D tensor in `[batch, channel, height, width]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl RealTensor4 {
    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            dims: [batch, channels, height, width],
            data: vec![0.0; batch * channels * height * width],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::shape(n, data.len()));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Stacks complex matrices of equal shape into a 2-channel (real, imaginary) tensor.
    pub fn stack_complex(mats: &[ComplexMatrix]) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::InvalidArgument("empty batch".into()));
        };
        let (h, w) = first.shape();
        let plane = h * w;
        let mut out = Self::zeros(mats.len(), 2, h, w);
        for (b, m) in mats.iter().enumerate() {
            if m.shape() != (h, w) {
                return Err(Error::shape(
                    format!("{h}x{w}"),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
            let base = b * 2 * plane;
            for (i, z) in m.as_slice().iter().enumerate() {
                out.data[base + i] = z.re;
                out.data[base + plane + i] = z.im;
            }
        }
        Ok(out)
    }

    /// Inverse of [`RealTensor4::stack_complex`].
    pub fn unstack_complex(&self) -> Result<Vec<ComplexMatrix>> {
        let [b, c, h, w] = self.dims;
        if c != 2 {
            return Err(Error::shape("2 channels", c));
        }
        let plane = h * w;
        Ok((0..b)
            .map(|i| {
                let base = i * 2 * plane;
                let data = (0..plane)
                    .map(|k| Complex64::new(self.data[base + k], self.data[base + plane + k]))
                    .collect();
                ComplexMatrix {
                    rows: h,
                    cols: w,
                    data,
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_matches_naive() {
        let a = ComplexMatrix::from_fn(3, 4, |r, k| c(r as f64 - k as f64, 0.5 * (r * k) as f64));
        let b = ComplexMatrix::from_fn(4, 2, |k, j| c(1.0 + k as f64, j as f64 - 0.25));
        let got = a.matmul(&b).unwrap();
        for r in 0..3 {
            for j in 0..2 {
                let want: Complex64 = (0..4).map(|k| a[(r, k)] * b[(k, j)]).sum();
                assert!((got[(r, j)] - want).norm() < 1e-12);
            }
        }
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn vec_is_column_major() {
        let m = ComplexMatrix::from_fn(2, 3, |r, col| c((10 * r + col) as f64, 0.0));
        let v: Vec<f64> = m.vec().iter().map(|z| z.re).collect();
        assert_eq!(v, vec![0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
        assert_eq!(ComplexMatrix::from_column_vec(2, 3, &m.vec()).unwrap(), m);
    }

    #[test]
    fn kron_of_identities() {
        let k = ComplexMatrix::identity(2).kron(&ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![c(0.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn stacking_round_trip() {
        let mats: Vec<_> = (0..3)
            .map(|b| ComplexMatrix::from_fn(4, 2, |r, col| c((b + r) as f64, -(col as f64) * 0.3)))
            .collect();
        let t = RealTensor4::stack_complex(&mats).unwrap();
        assert_eq!(t.dims(), [3, 2, 4, 2]);
        assert_eq!(t.unstack_complex().unwrap(), mats);
    }
}
