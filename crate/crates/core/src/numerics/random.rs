use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ComplexMatrix;

/// Matrix of i.i.d. circularly-symmetric complex Gaussians with unit variance
/// (real and imaginary parts each `N(0, 1/2)`).
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| standard_complex(rng))
}

pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent random stream for `(master seed, domain, index)`.
///
/// Domains separate logically disjoint uses of one master seed (training channels,
/// test channels, noise, ...); the index selects a ChaCha stream so per-sample
/// draws do not depend on how work is split across threads.
pub fn stream_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng =
        ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(domain.wrapping_add(0x5eed))));
    rng.set_stream(index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_variance_and_zero_mean() {
        let mut rng = stream_rng(42, 0, 0);
        let n = 1_000_000;
        let draws: Vec<Complex64> = (0..n).map(|_| standard_complex(&mut rng)).collect();
        let var = draws.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        let mean: Complex64 = draws.iter().sum::<Complex64>() / n as f64;
        // std of the mean of each part is sqrt(1/2 / n)
        let band = 3.0 * (0.5 / n as f64).sqrt();
        assert!(mean.re.abs() < band && mean.im.abs() < band, "mean {mean}");
    }

    #[test]
    fn seeded_streams_are_reproducible_and_distinct() {
        let a = complex_gaussian(4, 3, &mut stream_rng(9, 1, 5));
        let b = complex_gaussian(4, 3, &mut stream_rng(9, 1, 5));
        assert_eq!(a, b);
        let c = complex_gaussian(4, 3, &mut stream_rng(9, 1, 6));
        let d = complex_gaussian(4, 3, &mut stream_rng(9, 2, 5));
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
