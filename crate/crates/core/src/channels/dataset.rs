use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{
    build_covariance_with, sample_channel, sample_cluster_params, ChannelCovariance,
    ChannelModelConfig,
};
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, dft_matrix, stream_rng, ComplexMatrix};

/// Seed domains. Training and test channels never share a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub(crate) fn domain(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Test => 2,
        }
    }
}

/// One spatial-domain channel with the covariance it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub channel: ComplexMatrix,
    pub covariance: ChannelCovariance,
}

/// Provenance stored alongside a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: ChannelModelConfig,
    pub seed: u64,
    pub split: Split,
    /// Global amplitude factor applied so the mean of `‖h‖²` equals `N_rx N_tx`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    pub n_rx: usize,
    pub n_tx: usize,
    pub meta: DatasetMeta,
    pub samples: Vec<ChannelSample>,
}

impl ChannelDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.samples.iter().map(|s| &s.channel)
    }

    /// Mean of `‖h‖² / (N_rx N_tx)` over the dataset.
    pub fn mean_energy(&self) -> f64 {
        let n = (self.n_rx * self.n_tx) as f64;
        self.channels()
            .map(|h| h.frobenius_norm_sqr() / n)
            .sum::<f64>()
            / self.len().max(1) as f64
    }
}

/// Generates `m` independent `(δ, H)` pairs. Sample `i` uses its own random stream
/// derived from `(seed, split, i)`, so the result does not depend on thread count.
pub fn generate_dataset(
    model: &ChannelModelConfig,
    n_rx: usize,
    n_tx: usize,
    m: usize,
    seed: u64,
    split: Split,
) -> Result<ChannelDataset> {
    model.validate()?;
    if m == 0 {
        return Err(Error::InvalidArgument(
            "dataset size must be positive".into(),
        ));
    }
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::InvalidArgument(
            "antenna counts must be positive".into(),
        ));
    }
    let mut samples = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, split.domain(), i as u64);
            let delta = sample_cluster_params(model, &mut rng)?;
            let covariance = build_covariance_with(&delta, n_rx, n_tx, model.quadrature_points)?;
            let channel = sample_channel(&covariance, &mut rng)?;
            Ok(ChannelSample {
                channel,
                covariance,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = (n_rx * n_tx) as f64;
    let energy: f64 = samples.iter().map(|s| s.channel.frobenius_norm_sqr()).sum();
    let scale = (n * m as f64 / energy).sqrt();
    for s in &mut samples {
        s.channel.scale_mut(scale);
        s.covariance.rx.scale_mut(scale * scale);
    }
    Ok(ChannelDataset {
        n_rx,
        n_tx,
        meta: DatasetMeta {
            model: model.clone(),
            seed,
            split,
            scale,
        },
        samples,
    })
}

/// Received pilots `Y = H P + N` together with the known pilot matrix and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub received: ComplexMatrix,
    pub pilots: ComplexMatrix,
    pub noise_variance: f64,
}

impl PilotObservation {
    pub fn dims(&self) -> (usize, usize) {
        (self.received.rows(), self.pilots.rows())
    }

    /// Observation SNR `1/η²` on a linear scale.
    pub fn snr(&self) -> f64 {
        1.0 / self.noise_variance
    }
}

/// The `N_tx × N_tx` unitary DFT pilot matrix.
pub fn dft_pilots(n_tx: usize) -> ComplexMatrix {
    dft_matrix(n_tx)
}

/// Synthesises `Y = H P + N` with `N` drawn i.i.d. `N_C(0, η²)`.
pub fn observe<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    pilots: &ComplexMatrix,
    noise_variance: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    let unit = complex_gaussian(h.rows(), pilots.cols(), rng);
    observe_with_noise(h, pilots, noise_variance, &unit)
}

/// Like [`observe`] but with a caller-supplied unit-variance noise draw, so several
/// SNRs or estimators can share one realisation.
pub fn observe_with_noise(
    h: &ComplexMatrix,
    pilots: &ComplexMatrix,
    noise_variance: f64,
    unit_noise: &ComplexMatrix,
) -> Result<PilotObservation> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise variance {noise_variance} must be finite and >= 0"
        )));
    }
    if pilots.rows() != h.cols() || pilots.rows() != pilots.cols() {
        return Err(Error::shape(
            format!("{n}x{n} pilot matrix", n = h.cols()),
            format!("{}x{}", pilots.rows(), pilots.cols()),
        ));
    }
    let unitary_err = pilots
        .matmul(&pilots.adjoint())?
        .sub(&ComplexMatrix::identity(pilots.rows()))?
        .frobenius_norm();
    if unitary_err > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "pilot matrix is not unitary (error {unitary_err:.2e})"
        )));
    }
    if unit_noise.shape() != (h.rows(), pilots.cols()) {
        return Err(Error::shape(
            format!("{}x{} noise", h.rows(), pilots.cols()),
            format!("{}x{}", unit_noise.rows(), unit_noise.cols()),
        ));
    }
    let mut received = h.matmul(pilots)?;
    received.axpy_mut(noise_variance.sqrt(), unit_noise)?;
    Ok(PilotObservation {
        received,
        pilots: pilots.clone(),
        noise_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fft2;

    fn excess_kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        m4 / (m2 * m2) - 3.0
    }

    #[test]
    fn single_sample_dataset() {
        let ds =
            generate_dataset(&ChannelModelConfig::default(), 4, 2, 1, 3, Split::Train).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples[0].covariance.dims(), (4, 2));
        assert!((ds.mean_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_normalised_and_heavy_tailed() {
        let ds = generate_dataset(
            &ChannelModelConfig::default(),
            8,
            4,
            10_000,
            11,
            Split::Train,
        )
        .unwrap();
        let e = ds.mean_energy();
        assert!((0.98..=1.02).contains(&e), "{e}");
        // the stored covariances were rescaled with the channels
        let mean_trace =
            ds.samples.iter().map(|s| s.covariance.trace()).sum::<f64>() / ds.len() as f64;
        assert!((mean_trace / 32.0 - 1.0).abs() < 0.01);
        // every spatial entry has unit variance for every δ, so the heavy tails of the
        // mixture only show up per angular bin
        let re: Vec<f64> = ds
            .channels()
            .flat_map(|h| fft2(h).into_vec().into_iter().map(|z| z.re))
            .collect();
        let k = excess_kurtosis(&re);
        assert!(k > 0.5, "excess kurtosis {k}");
    }

    #[test]
    fn deterministic_and_split_disjoint() {
        let cfg = ChannelModelConfig::default();
        let a = generate_dataset(&cfg, 4, 2, 50, 5, Split::Train).unwrap();
        let b = generate_dataset(&cfg, 4, 2, 50, 5, Split::Train).unwrap();
        assert_eq!(a, b);
        let t = generate_dataset(&cfg, 4, 2, 50, 5, Split::Test).unwrap();
        for s in &t.samples {
            assert!(a.samples.iter().all(|x| x.channel != s.channel));
        }
    }

    #[test]
    fn conditional_gaussianity_for_fixed_delta() {
        let ds =
            generate_dataset(&ChannelModelConfig::default(), 4, 2, 1, 8, Split::Train).unwrap();
        let cov = &ds.samples[0].covariance;
        let mut rng = stream_rng(8, 9, 0);
        let xs: Vec<f64> = (0..50_000)
            .map(|_| sample_channel(cov, &mut rng).unwrap()[(1, 0)].re)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        // std error of sample skewness is ~sqrt(6/n)
        assert!(skew.abs() < 4.0 * (6.0 / n).sqrt(), "skew {skew}");
        assert!(excess_kurtosis(&xs).abs() < 0.1);
    }

    #[test]
    fn noiseless_and_identity_pilots() {
        let mut rng = stream_rng(1, 2, 3);
        let h = complex_gaussian(4, 2, &mut rng);
        let p = dft_pilots(2);
        let y = observe(&h, &p, 0.0, &mut rng).unwrap();
        assert!(
            y.received
                .sub(&h.matmul(&p).unwrap())
                .unwrap()
                .frobenius_norm()
                < 1e-14
        );
        // exactly invertible by LS decorrelation
        let ls = y.received.matmul(&p.adjoint()).unwrap();
        assert!(ls.sub(&h).unwrap().frobenius_norm() < 1e-12);

        let w = complex_gaussian(4, 2, &mut rng);
        let y = observe_with_noise(&h, &ComplexMatrix::identity(2), 0.25, &w).unwrap();
        let want = h.add(&w.scale(0.5)).unwrap();
        assert!(y.received.sub(&want).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_noise_and_pilots() {
        let h = ComplexMatrix::zeros(4, 2);
        let mut rng = stream_rng(1, 1, 1);
        assert!(observe(&h, &dft_pilots(2), -1.0, &mut rng).is_err());
        assert!(observe(&h, &dft_pilots(2), f64::NAN, &mut rng).is_err());
        assert!(observe(&h, &ComplexMatrix::identity(2).scale(2.0), 0.1, &mut rng).is_err());
        assert!(observe(&h, &dft_pilots(3), 0.1, &mut rng).is_err());
    }

    #[test]
    fn ls_error_equals_noise_variance() {
        let mut rng = stream_rng(4, 4, 4);
        let p = dft_pilots(4);
        let eta2 = 0.3;
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let h = complex_gaussian(8, 4, &mut rng);
            let y = observe(&h, &p, eta2, &mut rng).unwrap();
            let ls = y.received.matmul(&p.adjoint()).unwrap();
            acc += ls.sub(&h).unwrap().frobenius_norm_sqr() / 32.0;
        }
        let mse = acc / trials as f64;
        assert!((mse / eta2 - 1.0).abs() < 0.03, "{mse}");
    }

    #[test]
    fn angular_domain_is_compressible() {
        let ds =
            generate_dataset(&ChannelModelConfig::default(), 16, 4, 200, 2, Split::Train).unwrap();
        // fraction of energy in the strongest quarter of angular bins
        let mut frac = 0.0;
        for h in ds.channels() {
            let mut p: Vec<f64> = fft2(h).as_slice().iter().map(|z| z.norm_sqr()).collect();
            p.sort_by(|a, b| b.partial_cmp(a).unwrap());
            frac += p[..16].iter().sum::<f64>() / p.iter().sum::<f64>();
        }
        assert!(frac / 200.0 > 0.8, "{}", frac / 200.0);
    }
}
