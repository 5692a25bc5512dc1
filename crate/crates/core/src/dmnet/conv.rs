//! 3×3 same-padding convolution kernels on channel-major `[C, B·H·W]` buffers.

/// `C = alpha·op(A)·op(B) + beta·C` with row-major operands, `op(A)` of shape `m×k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if trans_b {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `x: [C, B, H, W]` into `[C·9, B·H·W]` with zero padding.
pub(crate) fn im2col(x: &[f64], channels: usize, batch: usize, h: usize, w: usize) -> Vec<f64> {
    let plane = h * w;
    let cols_n = batch * plane;
    let mut cols = vec![0.0; channels * 9 * cols_n];
    for c in 0..channels {
        let src = &x[c * cols_n..(c + 1) * cols_n];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * cols_n..][..cols_n];
                let (y0, y1) = (ky.saturating_sub(1), (h + ky).saturating_sub(1).min(h));
                let (x0, x1) = (kx.saturating_sub(1), (w + kx).saturating_sub(1).min(w));
                for b in 0..batch {
                    for y in y0..y1 {
                        let sy = y + 1 - ky;
                        let dst = &mut row[b * plane + sy * w..][..w];
                        let s = &src[b * plane + y * w..][..w];
                        for xx in x0..x1 {
                            dst[xx + 1 - kx] = s[xx];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds `[C·9, B·H·W]` back onto `[C, B, H, W]`, summing overlaps.
pub(crate) fn col2im(cols: &[f64], channels: usize, batch: usize, h: usize, w: usize) -> Vec<f64> {
    let plane = h * w;
    let cols_n = batch * plane;
    let mut x = vec![0.0; channels * cols_n];
    for c in 0..channels {
        let dst = &mut x[c * cols_n..(c + 1) * cols_n];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(c * 9 + ky * 3 + kx) * cols_n..][..cols_n];
                let (y0, y1) = (ky.saturating_sub(1), (h + ky).saturating_sub(1).min(h));
                let (x0, x1) = (kx.saturating_sub(1), (w + kx).saturating_sub(1).min(w));
                for b in 0..batch {
                    for y in y0..y1 {
                        let sy = y + 1 - ky;
                        let s = &row[b * plane + sy * w..][..w];
                        let d = &mut dst[b * plane + y * w..][..w];
                        for xx in x0..x1 {
                            d[xx] += s[xx + 1 - kx];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Same-padding convolution: returns `[out, B·H·W]`.
pub(crate) fn conv_forward(
    cols: &[f64],
    weight: &[f64],
    bias: &[f64],
    out_ch: usize,
    cols_n: usize,
) -> Vec<f64> {
    let k = weight.len() / out_ch;
    let mut y = vec![0.0; out_ch * cols_n];
    for (o, &b) in bias.iter().enumerate() {
        y[o * cols_n..(o + 1) * cols_n]
            .iter_mut()
            .for_each(|v| *v = b);
    }
    gemm(out_ch, k, cols_n, weight, false, cols, false, 1.0, &mut y);
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution on `[B, C, H, W]`.
    #[allow(clippy::too_many_arguments)]
    fn naive_conv(
        x: &[f64],
        w: &[f64],
        bias: &[f64],
        cin: usize,
        cout: usize,
        b: usize,
        h: usize,
        wd: usize,
    ) -> Vec<f64> {
        let mut y = vec![0.0; b * cout * h * wd];
        for n in 0..b {
            for o in 0..cout {
                for i in 0..h {
                    for j in 0..wd {
                        let mut acc = bias[o];
                        for c in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let (yy, xx) = (
                                        i as isize + ky as isize - 1,
                                        j as isize + kx as isize - 1,
                                    );
                                    if yy < 0 || xx < 0 || yy >= h as isize || xx >= wd as isize {
                                        continue;
                                    }
                                    acc += w[((o * cin + c) * 3 + ky) * 3 + kx]
                                        * x[((n * cin + c) * h + yy as usize) * wd + xx as usize];
                                }
                            }
                        }
                        y[((n * cout + o) * h + i) * wd + j] = acc;
                    }
                }
            }
        }
        y
    }

    fn to_cnhw(x: &[f64], b: usize, c: usize, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for n in 0..b {
            for ch in 0..c {
                out[(ch * b + n) * p..][..p].copy_from_slice(&x[(n * c + ch) * p..][..p]);
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        (0..n)
            .map(|i| ((((i as u64 + 1) * 2654435761) ^ seed) % 1000) as f64 / 500.0 - 1.0)
            .collect()
    }

    #[test]
    fn matches_naive_convolution() {
        for &(b, cin, cout, h, w) in &[
            (2, 3, 4, 4, 2),
            (1, 2, 2, 1, 1),
            (3, 1, 5, 5, 3),
            (1, 2, 3, 2, 6),
        ] {
            let x = pseudo(b * cin * h * w, 7);
            let wt = pseudo(cout * cin * 9, 11);
            let bias = pseudo(cout, 13);
            let want = to_cnhw(
                &naive_conv(&x, &wt, &bias, cin, cout, b, h, w),
                b,
                cout,
                h * w,
            );
            let cols = im2col(&to_cnhw(&x, b, cin, h * w), cin, b, h, w);
            let got = conv_forward(&cols, &wt, &bias, cout, b * h * w);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint() {
        let (c, b, h, w) = (3, 2, 4, 3);
        let x = pseudo(c * b * h * w, 3);
        let y = pseudo(c * 9 * b * h * w, 5);
        let lhs: f64 = im2col(&x, c, b, h, w)
            .iter()
            .zip(&y)
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f64 = x
            .iter()
            .zip(col2im(&y, c, b, h, w))
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn gemm_transposes() {
        // A = [[1,2,3],[4,5,6]], B = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0; 4];
        gemm(2, 3, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut d = [1.0; 4];
        gemm(2, 3, 2, &at, true, &bt, true, 1.0, &mut d);
        assert_eq!(d, [5.0, 6.0, 11.0, 12.0]);
    }
}
