use num_complex::Complex64;

use crate::channels::{ChannelCovariance, ChannelDataset, PilotObservation};
use crate::error::{Error, Result};
use crate::numerics::{Cholesky, ComplexMatrix};

/// `Ĥ = Y P^H`.
pub fn ls_estimate(obs: &PilotObservation) -> Result<ComplexMatrix> {
    obs.received.matmul(&obs.pilots.adjoint())
}

/// Stacks `vec(·)` of each matrix as the columns of an `n × B` block.
pub fn stack_columns(mats: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let Some(first) = mats.first() else {
        return Ok(ComplexMatrix::zeros(0, 0));
    };
    let n = first.len();
    let b = mats.len();
    let mut out = ComplexMatrix::zeros(n, b);
    for (j, m) in mats.iter().enumerate() {
        if m.shape() != first.shape() {
            return Err(Error::shape(
                format!("{:?}", first.shape()),
                format!("{:?}", m.shape()),
            ));
        }
        for (i, z) in m.vec().into_iter().enumerate() {
            out[(i, j)] = z;
        }
    }
    Ok(out)
}

/// Splits an `n × B` block back into `B` matrices of shape `rows × cols` (column-major).
pub fn unstack_columns(
    block: &ComplexMatrix,
    rows: usize,
    cols: usize,
) -> Result<Vec<ComplexMatrix>> {
    if block.rows() != rows * cols {
        return Err(Error::shape(rows * cols, block.rows()));
    }
    (0..block.cols())
        .map(|j| {
            let v: Vec<Complex64> = (0..block.rows()).map(|i| block[(i, j)]).collect();
            ComplexMatrix::from_column_vec(rows, cols, &v)
        })
        .collect()
}

/// `(1/M) Σ vec(H) vec(H)^H`, symmetrised to be exactly Hermitian.
pub fn sample_covariance(dataset: &ChannelDataset) -> Result<ComplexMatrix> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument(
            "sample covariance of an empty dataset".into(),
        ));
    }
    let mats: Vec<ComplexMatrix> = dataset.channels().cloned().collect();
    let x = stack_columns(&mats)?;
    let mut c = x.matmul(&x.adjoint())?;
    c.scale_mut(1.0 / dataset.len() as f64);
    c.symmetrize();
    Ok(c)
}

/// The linear filter `W = C (C + η² I)^{-1}` for one covariance and noise level.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    filter: ComplexMatrix,
}

impl LmmseFilter {
    pub fn new(covariance: &ComplexMatrix, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "LMMSE needs a positive noise variance, got {noise_variance}"
            )));
        }
        let mut loaded = covariance.clone();
        loaded.add_diagonal(noise_variance);
        // (C + η² I)^{-1} C is the adjoint of W since both factors are Hermitian
        let filter = Cholesky::new(&loaded)?.solve(covariance)?.adjoint();
        Ok(Self { filter })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.filter
    }

    /// Filters each column of an `n × B` block.
    pub fn apply(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.filter.matmul(y)
    }
}

/// `ĥ = C (C + η² I)^{-1} y` for a column vector `y`.
pub fn lmmse_estimate(
    y: &ComplexMatrix,
    covariance: &ComplexMatrix,
    noise_variance: f64,
) -> Result<ComplexMatrix> {
    let mut loaded = covariance.clone();
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "LMMSE needs a positive noise variance, got {noise_variance}"
        )));
    }
    loaded.add_diagonal(noise_variance);
    covariance.matmul(&Cholesky::new(&loaded)?.solve(y)?)
}

/// LMMSE with a fixed (sample) covariance applied to an observation.
pub fn scov_estimate(obs: &PilotObservation, covariance: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (r, c) = obs.dims();
    let y = ComplexMatrix::from_column_vec(r * c, 1, &ls_estimate(obs)?.vec())?;
    let h = lmmse_estimate(&y, covariance, obs.noise_variance)?;
    ComplexMatrix::from_column_vec(r, c, h.as_slice())
}

/// LMMSE with the sample's own covariance `C_tx^T ⊗ C_rx`.
pub fn genie_estimate(
    obs: &PilotObservation,
    covariance: &ChannelCovariance,
) -> Result<ComplexMatrix> {
    scov_estimate(obs, &covariance.full())
}

/// Closed-form normalised MSE of the LMMSE estimator under the true Gaussian prior:
/// `tr(C − C (C + η² I)^{-1} C) / n`.
pub fn lmmse_mse(covariance: &ComplexMatrix, noise_variance: f64) -> Result<f64> {
    let w = LmmseFilter::new(covariance, noise_variance)?;
    let err = covariance.sub(&w.matrix().matmul(covariance)?)?;
    Ok(err.trace().re / covariance.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        build_covariance, dft_pilots, generate_dataset, observe, observe_with_noise,
        sample_channel, sample_cluster_params, ChannelModelConfig, Split,
    };
    use crate::numerics::{complex_gaussian, stream_rng};

    #[test]
    fn ls_is_exact_without_noise_and_y_for_identity() {
        let mut rng = stream_rng(1, 0, 0);
        let h = complex_gaussian(4, 2, &mut rng);
        let obs = observe_with_noise(&h, &dft_pilots(2), 0.0, &ComplexMatrix::zeros(4, 2)).unwrap();
        assert!(ls_estimate(&obs).unwrap().sub(&h).unwrap().frobenius_norm() < 1e-12);
        let obs = observe(&h, &ComplexMatrix::identity(2), 0.3, &mut rng).unwrap();
        assert_eq!(ls_estimate(&obs).unwrap(), obs.received);
    }

    #[test]
    fn ls_mse_equals_noise_variance() {
        let mut rng = stream_rng(2, 0, 0);
        let p = dft_pilots(4);
        let eta2 = 0.2;
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let h = complex_gaussian(8, 4, &mut rng);
            let obs = observe(&h, &p, eta2, &mut rng).unwrap();
            acc += ls_estimate(&obs)
                .unwrap()
                .sub(&h)
                .unwrap()
                .frobenius_norm_sqr()
                / 32.0;
        }
        let mse = acc / trials as f64;
        assert!((mse / eta2 - 1.0).abs() < 0.03, "{mse}");
    }

    #[test]
    fn sample_covariance_properties() {
        let ds =
            generate_dataset(&ChannelModelConfig::default(), 4, 2, 1, 0, Split::Train).unwrap();
        let c = sample_covariance(&ds).unwrap();
        let v = ds.samples[0].channel.vec();
        let outer = ComplexMatrix::from_fn(8, 8, |i, j| v[i] * v[j].conj());
        assert!(c.sub(&outer).unwrap().frobenius_norm() < 1e-12);
        let ds =
            generate_dataset(&ChannelModelConfig::default(), 4, 2, 500, 0, Split::Train).unwrap();
        let c = sample_covariance(&ds).unwrap();
        assert!(c.hermitian_defect() <= 1e-12);
        assert!((c.trace().re / 8.0 - ds.mean_energy()).abs() < 1e-9);
    }

    #[test]
    fn sample_covariance_of_white_data_is_identity() {
        let mut rng = stream_rng(3, 0, 0);
        let mut ds =
            generate_dataset(&ChannelModelConfig::default(), 4, 2, 1, 0, Split::Train).unwrap();
        let template = ds.samples[0].clone();
        ds.samples = (0..100_000)
            .map(|_| {
                let mut s = template.clone();
                s.channel = complex_gaussian(4, 2, &mut rng);
                s
            })
            .collect();
        let c = sample_covariance(&ds).unwrap();
        let err = c.sub(&ComplexMatrix::identity(8)).unwrap().frobenius_norm() / 8f64.sqrt();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn identity_prior_shrinks() {
        let mut rng = stream_rng(4, 0, 0);
        let y = complex_gaussian(6, 1, &mut rng);
        let h = lmmse_estimate(&y, &ComplexMatrix::identity(6), 0.5).unwrap();
        assert!(h.sub(&y.scale(1.0 / 1.5)).unwrap().frobenius_norm() < 1e-12);
        let h = lmmse_estimate(&y, &ComplexMatrix::identity(6), 1e-12).unwrap();
        assert!(h.sub(&y).unwrap().frobenius_norm() < 1e-9);
        assert!(lmmse_estimate(&y, &ComplexMatrix::identity(6), 0.0).is_err());
    }

    #[test]
    fn filter_matches_direct_solve_and_is_linear() {
        let mut rng = stream_rng(5, 0, 0);
        let a = complex_gaussian(6, 6, &mut rng);
        let c = a.matmul(&a.adjoint()).unwrap();
        let y = complex_gaussian(6, 3, &mut rng);
        let f = LmmseFilter::new(&c, 0.7).unwrap();
        let block = f.apply(&y).unwrap();
        for j in 0..3 {
            let col = ComplexMatrix::from_fn(6, 1, |i, _| y[(i, j)]);
            let direct = lmmse_estimate(&col, &c, 0.7).unwrap();
            let scaled = lmmse_estimate(&col.scale(-2.5), &c, 0.7).unwrap();
            for i in 0..6 {
                assert!((direct[(i, 0)] - block[(i, j)]).norm() < 1e-10);
                assert!((scaled[(i, 0)] + 2.5 * direct[(i, 0)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn stacking_round_trip() {
        let mut rng = stream_rng(6, 0, 0);
        let ms: Vec<_> = (0..3).map(|_| complex_gaussian(4, 2, &mut rng)).collect();
        let block = stack_columns(&ms).unwrap();
        assert_eq!(block.shape(), (8, 3));
        assert_eq!(unstack_columns(&block, 4, 2).unwrap(), ms);
    }

    #[test]
    fn genie_mse_matches_closed_form() {
        let model = ChannelModelConfig::default();
        let mut rng = stream_rng(7, 0, 0);
        let delta = sample_cluster_params(&model, &mut rng).unwrap();
        let cov = build_covariance(&delta, 8, 2).unwrap();
        let eta2 = 0.1;
        let want = lmmse_mse(&cov.full(), eta2).unwrap();
        let p = dft_pilots(2);
        let trials = 20_000;
        let mut errs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let h = sample_channel(&cov, &mut rng).unwrap();
            let obs = observe(&h, &p, eta2, &mut rng).unwrap();
            errs.push(
                genie_estimate(&obs, &cov)
                    .unwrap()
                    .sub(&h)
                    .unwrap()
                    .frobenius_norm_sqr()
                    / 16.0,
            );
        }
        let mean = errs.iter().sum::<f64>() / trials as f64;
        let sd =
            (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        let se = sd / (trials as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} ± {se}");
    }
}
