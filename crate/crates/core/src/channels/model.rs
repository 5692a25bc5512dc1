use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, psd_factor, ComplexMatrix};

/// Configuration of the conditionally Gaussian cluster channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModelConfig {
    pub num_clusters: usize,
    /// Lower and upper sector bound for cluster centres, in degrees.
    pub sector_deg: [f64; 2],
    /// Standard deviation of the per-cluster Laplacian power spectrum, in degrees.
    pub angular_spread_deg: f64,
    pub quadrature_points: usize,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            num_clusters: 3,
            sector_deg: [-60.0, 60.0],
            angular_spread_deg: 2.0,
            quadrature_points: 180,
        }
    }
}

impl ChannelModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::InvalidArgument(
                "number of clusters must be positive".into(),
            ));
        }
        let [lo, hi] = self.sector_deg;
        if !(lo < hi) || lo < -90.0 || hi > 90.0 {
            return Err(Error::InvalidArgument(format!(
                "sector [{lo}, {hi}] must be increasing and inside [-90, 90] degrees"
            )));
        }
        if !(self.angular_spread_deg > 0.0) {
            return Err(Error::InvalidArgument(
                "angular spread must be positive".into(),
            ));
        }
        if self.quadrature_points == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one point".into(),
            ));
        }
        Ok(())
    }
}

/// Random propagation parameters `δ` of one channel realisation (angles in radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub rx_angles: Vec<f64>,
    pub tx_angles: Vec<f64>,
    pub powers: Vec<f64>,
    pub angular_spread: f64,
}

impl ClusterParams {
    pub fn num_clusters(&self) -> usize {
        self.powers.len()
    }
}

/// Kronecker-separable channel covariance `C_δ = C_tx^T ⊗ C_rx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCovariance {
    pub rx: ComplexMatrix,
    pub tx: ComplexMatrix,
}

impl ChannelCovariance {
    pub fn identity(n_rx: usize, n_tx: usize) -> Self {
        Self {
            rx: ComplexMatrix::identity(n_rx),
            tx: ComplexMatrix::identity(n_tx),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rx.rows(), self.tx.rows())
    }

    /// Full `N_rx N_tx × N_rx N_tx` covariance of `vec(H)`.
    pub fn full(&self) -> ComplexMatrix {
        self.tx.transpose().kron(&self.rx)
    }

    pub fn trace(&self) -> f64 {
        self.rx.trace().re * self.tx.trace().re
    }
}

/// Draws cluster centres uniformly over the sector and powers uniformly on the simplex.
pub fn sample_cluster_params<R: Rng + ?Sized>(
    config: &ChannelModelConfig,
    rng: &mut R,
) -> Result<ClusterParams> {
    config.validate()?;
    let [lo, hi] = config.sector_deg;
    let (lo, hi) = (lo.to_radians(), hi.to_radians());
    let p = config.num_clusters;
    let rx_angles = (0..p).map(|_| rng.random_range(lo..=hi)).collect();
    let tx_angles = (0..p).map(|_| rng.random_range(lo..=hi)).collect();
    let raw: Vec<f64> = (0..p).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let powers = raw.iter().map(|x| x / total).collect();
    Ok(ClusterParams {
        rx_angles,
        tx_angles,
        powers,
        angular_spread: config.angular_spread_deg.to_radians(),
    })
}

/// Covariance of a half-wavelength ULA with `n` elements for the given cluster centres.
///
/// Each cluster contributes a Laplacian power spectrum with standard deviation `spread`,
/// integrated on `points` one-degree nodes centred on the cluster angle.
pub fn ula_covariance(
    n: usize,
    centres: &[f64],
    powers: &[f64],
    spread: f64,
    points: usize,
) -> ComplexMatrix {
    let step = PI / 180.0;
    let half = (points / 2) as f64;
    let decay = std::f64::consts::SQRT_2 / spread;
    let offsets: Vec<f64> = (0..points).map(|i| (i as f64 - half) * step).collect();
    let raw: Vec<f64> = offsets.iter().map(|o| (-decay * o.abs()).exp()).collect();
    let norm: f64 = raw.iter().sum();

    // Toeplitz: C[m, k] depends only on m - k
    let mut lag = vec![Complex64::new(0.0, 0.0); n];
    for (&centre, &power) in centres.iter().zip(powers) {
        for (&o, &w) in offsets.iter().zip(&raw) {
            let w = power * w / norm;
            if w == 0.0 {
                continue;
            }
            let phase = PI * (centre + o).sin();
            for (d, l) in lag.iter_mut().enumerate() {
                *l += Complex64::from_polar(w, phase * d as f64);
            }
        }
    }
    ComplexMatrix::from_fn(n, n, |m, k| {
        if m >= k {
            lag[m - k]
        } else {
            lag[k - m].conj()
        }
    })
}

/// Builds `C_rx`, `C_tx` from `δ`, normalised so that `tr(C_tx^T ⊗ C_rx) = N_rx N_tx`.
pub fn build_covariance(
    delta: &ClusterParams,
    n_rx: usize,
    n_tx: usize,
) -> Result<ChannelCovariance> {
    build_covariance_with(delta, n_rx, n_tx, 180)
}

pub fn build_covariance_with(
    delta: &ClusterParams,
    n_rx: usize,
    n_tx: usize,
    quadrature_points: usize,
) -> Result<ChannelCovariance> {
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::InvalidArgument(
            "antenna counts must be positive".into(),
        ));
    }
    let p = delta.num_clusters();
    if p == 0 || delta.rx_angles.len() != p || delta.tx_angles.len() != p {
        return Err(Error::InvalidArgument(
            "cluster parameter lengths disagree".into(),
        ));
    }
    let mut rx = ula_covariance(
        n_rx,
        &delta.rx_angles,
        &delta.powers,
        delta.angular_spread,
        quadrature_points,
    );
    let mut tx = ula_covariance(
        n_tx,
        &delta.tx_angles,
        &delta.powers,
        delta.angular_spread,
        quadrature_points,
    );
    for (c, n) in [(&mut rx, n_rx), (&mut tx, n_tx)] {
        c.symmetrize();
        let tr = c.trace().re;
        if !(tr > 0.0) {
            return Err(Error::NotPositiveSemidefinite(tr));
        }
        c.scale_mut(n as f64 / tr);
        // fails only if quadrature produced a non-PSD matrix
        psd_factor(c)?;
    }
    Ok(ChannelCovariance { rx, tx })
}

/// Draws `H` with `vec(H) ~ N_C(0, C_tx^T ⊗ C_rx)` as `H = L_rx W L_tx^H`.
pub fn sample_channel<R: Rng + ?Sized>(
    cov: &ChannelCovariance,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let l_rx = psd_factor(&cov.rx)?;
    let l_tx = psd_factor(&cov.tx)?;
    let (n_rx, n_tx) = cov.dims();
    let w = complex_gaussian(n_rx, n_tx, rng);
    l_rx.matmul(&w)?.matmul(&l_tx.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_eigenvalues, stream_rng};

    fn single_cluster(angle: f64, spread: f64) -> ClusterParams {
        ClusterParams {
            rx_angles: vec![angle],
            tx_angles: vec![angle],
            powers: vec![1.0],
            angular_spread: spread,
        }
    }

    #[test]
    fn one_cluster_has_unit_power() {
        let cfg = ChannelModelConfig {
            num_clusters: 1,
            ..Default::default()
        };
        let d = sample_cluster_params(&cfg, &mut stream_rng(1, 0, 0)).unwrap();
        assert_eq!(d.powers, vec![1.0]);
    }

    #[test]
    fn zero_clusters_rejected() {
        let cfg = ChannelModelConfig {
            num_clusters: 0,
            ..Default::default()
        };
        assert!(sample_cluster_params(&cfg, &mut stream_rng(1, 0, 0)).is_err());
    }

    #[test]
    fn angles_in_sector_and_powers_on_simplex() {
        let cfg = ChannelModelConfig::default();
        let mut rng = stream_rng(2, 0, 0);
        for _ in 0..200 {
            let d = sample_cluster_params(&cfg, &mut rng).unwrap();
            for a in d.rx_angles.iter().chain(&d.tx_angles) {
                assert!(a.to_degrees() >= -60.0 - 1e-9 && a.to_degrees() <= 60.0 + 1e-9);
            }
            assert!((d.powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.powers.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn angles_pass_ks_uniformity() {
        let cfg = ChannelModelConfig {
            num_clusters: 1,
            ..Default::default()
        };
        let mut rng = stream_rng(3, 0, 0);
        let n = 100_000;
        let (lo, hi) = (-60f64.to_radians(), 60f64.to_radians());
        let mut u: Vec<f64> = (0..n)
            .map(|_| (sample_cluster_params(&cfg, &mut rng).unwrap().rx_angles[0] - lo) / (hi - lo))
            .collect();
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // 1% critical value of the Kolmogorov distribution
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn vanishing_spread_gives_steering_outer_product() {
        let d = single_cluster(0.0, 1e-9);
        let cov = build_covariance(&d, 2, 2).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((cov.rx[(r, c)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
        let d = single_cluster(0.4, 1e-6);
        let cov = build_covariance(&d, 16, 4).unwrap();
        let eig = hermitian_eigenvalues(&cov.rx).unwrap();
        assert!(*eig.last().unwrap() >= 0.99 * 16.0);
    }

    #[test]
    fn covariance_contract() {
        let cfg = ChannelModelConfig::default();
        let mut rng = stream_rng(4, 0, 0);
        for _ in 0..20 {
            let d = sample_cluster_params(&cfg, &mut rng).unwrap();
            let cov = build_covariance(&d, 16, 4).unwrap();
            assert!((cov.trace() - 64.0).abs() < 1e-9);
            for c in [&cov.rx, &cov.tx] {
                assert!(c.hermitian_defect() < 1e-10);
                let eig = hermitian_eigenvalues(c).unwrap();
                assert!(eig[0] >= -1e-10 * c.trace().re);
            }
        }
    }

    #[test]
    fn identity_covariance_gives_unit_variance() {
        let cov = ChannelCovariance::identity(4, 2);
        let mut rng = stream_rng(5, 0, 0);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sample_channel(&cov, &mut rng).unwrap().frobenius_norm_sqr();
        }
        let per_entry = acc / (n as f64 * 8.0);
        assert!((per_entry - 1.0).abs() < 0.01, "{per_entry}");
    }

    #[test]
    fn sample_covariance_converges_to_kronecker_model() {
        let cfg = ChannelModelConfig::default();
        let d = sample_cluster_params(&cfg, &mut stream_rng(6, 0, 0)).unwrap();
        let cov = build_covariance(&d, 4, 2).unwrap();
        let full = cov.full();
        let mut rng = stream_rng(6, 1, 0);
        let n = 100_000;
        let mut acc = ComplexMatrix::zeros(8, 8);
        for _ in 0..n {
            let h = sample_channel(&cov, &mut rng).unwrap().vec();
            for r in 0..8 {
                for c in 0..8 {
                    acc[(r, c)] += h[r] * h[c].conj();
                }
            }
        }
        let emp = acc.scale(1.0 / n as f64);
        let rel = emp.sub(&full).unwrap().frobenius_norm() / full.frobenius_norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn fixed_seed_reproducible() {
        let cov = ChannelCovariance::identity(3, 2);
        let a = sample_channel(&cov, &mut stream_rng(7, 0, 1)).unwrap();
        let b = sample_channel(&cov, &mut stream_rng(7, 0, 1)).unwrap();
        assert_eq!(a, b);
    }
}
