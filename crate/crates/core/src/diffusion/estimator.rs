use crate::channels::PilotObservation;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, Dft2};

use super::NoiseSchedule;

/// A learned (or oracle) reverse-process mean `f_t(h_t) = μ(h_t, t)` acting on
/// angular-domain latents.
pub trait Denoiser {
    /// Channel shape the denoiser was built for, if it has one.
    fn dims(&self) -> Option<(usize, usize)> {
        None
    }

    fn predict_mean(
        &self,
        latent: &ComplexMatrix,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<ComplexMatrix>;

    /// Evaluates several latents at the same step. Override when batching is cheaper.
    fn predict_mean_batch(
        &self,
        latents: &[ComplexMatrix],
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<ComplexMatrix>> {
        latents
            .iter()
            .map(|h| self.predict_mean(h, t, schedule))
            .collect()
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn dims(&self) -> Option<(usize, usize)> {
        (**self).dims()
    }

    fn predict_mean(
        &self,
        latent: &ComplexMatrix,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<ComplexMatrix> {
        (**self).predict_mean(latent, t, schedule)
    }

    fn predict_mean_batch(
        &self,
        latents: &[ComplexMatrix],
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<ComplexMatrix>> {
        (**self).predict_mean_batch(latents, t, schedule)
    }
}

/// Result of one SNR-matched reverse run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    /// Entry step `t̂`.
    pub matched_step: usize,
    /// Angular-domain iterates `Ĥ_t̂, Ĥ_{t̂-1}, …, Ĥ_0` (length `t̂ + 1`).
    pub latents: Vec<ComplexMatrix>,
    /// Spatial-domain estimate `ifft2(Ĥ_0)`.
    pub estimate: ComplexMatrix,
}

impl EstimationTrace {
    /// Angular-domain iterate `Ĥ_t` for `0 <= t <= t̂`.
    pub fn latent(&self, t: usize) -> Option<&ComplexMatrix> {
        self.matched_step
            .checked_sub(t)
            .and_then(|i| self.latents.get(i))
    }
}

/// Normalised angular-domain LS estimate `fft2(Y P^H / √(1+η²))`, the reverse-process
/// initialisation.
pub fn initial_latent(obs: &PilotObservation, dft: &Dft2) -> Result<ComplexMatrix> {
    let ls = obs.received.matmul(&obs.pilots.adjoint())?;
    let ls = ls.scale(1.0 / (1.0 + obs.noise_variance).sqrt());
    if ls.shape() != dft.shape() {
        return Err(Error::shape(
            format!("{:?}", dft.shape()),
            format!("{:?}", ls.shape()),
        ));
    }
    Ok(dft.forward(&ls))
}

/// Deterministic truncated reverse process: LS, variance normalisation, angular
/// transform, SNR-matched entry step, `t̂` applications of the denoiser mean without
/// resampling, inverse transform.
pub fn estimate_channel<D: Denoiser + ?Sized>(
    obs: &PilotObservation,
    denoiser: &D,
    schedule: &NoiseSchedule,
) -> Result<EstimationTrace> {
    let mut traces = estimate_channels(std::slice::from_ref(obs), denoiser, schedule)?;
    Ok(traces.pop().expect("one observation in, one trace out"))
}

/// Batched [`estimate_channel`]. Observations whose matched steps coincide share
/// denoiser calls, which is how the network is evaluated efficiently.
pub fn estimate_channels<D: Denoiser + ?Sized>(
    observations: &[PilotObservation],
    denoiser: &D,
    schedule: &NoiseSchedule,
) -> Result<Vec<EstimationTrace>> {
    let Some(first) = observations.first() else {
        return Ok(Vec::new());
    };
    let dims = first.dims();
    if let Some(expected) = denoiser.dims() {
        if expected != dims {
            return Err(Error::shape(
                format!("{}x{} channels for this denoiser", expected.0, expected.1),
                format!("{}x{}", dims.0, dims.1),
            ));
        }
    }
    if let Some(bad) = observations.iter().find(|o| o.dims() != dims) {
        return Err(Error::shape(
            format!("{dims:?}"),
            format!("{:?}", bad.dims()),
        ));
    }
    let dft = Dft2::new(dims.0, dims.1);

    let mut runs: Vec<(usize, Vec<ComplexMatrix>)> = observations
        .iter()
        .map(|o| {
            if !(o.noise_variance > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "estimation needs a positive noise variance, got {}",
                    o.noise_variance
                )));
            }
            let t_hat = schedule.match_timestep(o.snr());
            Ok((t_hat, vec![initial_latent(o, &dft)?]))
        })
        .collect::<Result<_>>()?;

    let t_max = runs.iter().map(|r| r.0).max().unwrap_or(0);
    for t in (1..=t_max).rev() {
        let active: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].0 >= t).collect();
        let inputs: Vec<ComplexMatrix> = active
            .iter()
            .map(|&i| runs[i].1.last().expect("initialised").clone())
            .collect();
        let outputs = denoiser.predict_mean_batch(&inputs, t, schedule)?;
        if outputs.len() != inputs.len() {
            return Err(Error::shape(inputs.len(), outputs.len()));
        }
        for (&i, out) in active.iter().zip(outputs) {
            runs[i].1.push(out);
        }
    }

    Ok(runs
        .into_iter()
        .map(|(matched_step, latents)| {
            let estimate = dft.inverse(latents.last().expect("non-empty trace"));
            EstimationTrace {
                matched_step,
                latents,
                estimate,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::channels::{dft_pilots, observe, observe_with_noise};
    use crate::diffusion::ScheduleConfig;
    use crate::numerics::{complex_gaussian, fft2, stream_rng};

    struct Identity;

    impl Denoiser for Identity {
        fn predict_mean(
            &self,
            latent: &ComplexMatrix,
            _t: usize,
            _s: &NoiseSchedule,
        ) -> Result<ComplexMatrix> {
            Ok(latent.clone())
        }
    }

    /// Exact forward-posterior mean with the true angular-domain channel.
    struct PosteriorOracle {
        h0: ComplexMatrix,
        calls: Cell<usize>,
    }

    impl Denoiser for PosteriorOracle {
        fn predict_mean(
            &self,
            latent: &ComplexMatrix,
            t: usize,
            s: &NoiseSchedule,
        ) -> Result<ComplexMatrix> {
            self.calls.set(self.calls.get() + 1);
            s.posterior_mean(latent, &self.h0, t)
        }
    }

    fn schedule() -> NoiseSchedule {
        ScheduleConfig::default().build().unwrap()
    }

    #[test]
    fn identity_stub_returns_normalised_ls() {
        let s = schedule();
        let mut rng = stream_rng(1, 0, 0);
        let h = complex_gaussian(8, 4, &mut rng);
        let p = dft_pilots(4);
        for eta2 in [1e-3, 0.1, 1.0, 10.0] {
            let obs = observe(&h, &p, eta2, &mut rng).unwrap();
            let trace = estimate_channel(&obs, &Identity, &s).unwrap();
            let ls = obs.received.matmul(&p.adjoint()).unwrap();
            let want = ls.scale(1.0 / (1.0 + eta2).sqrt());
            assert!(trace.estimate.sub(&want).unwrap().frobenius_norm() < 1e-10);
            assert_eq!(trace.latents.len(), trace.matched_step + 1);
        }
    }

    #[test]
    fn identity_stub_error_matches_prediction() {
        // E‖ξ^{-1}(h+n) - h‖² / N = (1 - 1/ξ)² E|h|² + η²/ξ²
        let s = schedule();
        let p = dft_pilots(4);
        let eta2: f64 = 0.5;
        let xi = (1.0 + eta2).sqrt();
        let want = (1.0 - 1.0 / xi).powi(2) + eta2 / (xi * xi);
        let mut rng = stream_rng(2, 0, 0);
        let trials = 5000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let h = complex_gaussian(8, 4, &mut rng);
            let obs = observe(&h, &p, eta2, &mut rng).unwrap();
            let est = estimate_channel(&obs, &Identity, &s).unwrap().estimate;
            acc += est.sub(&h).unwrap().frobenius_norm_sqr() / 32.0;
        }
        let mse = acc / trials as f64;
        assert!((mse / want - 1.0).abs() < 0.03, "{mse} vs {want}");
    }

    #[test]
    fn oracle_recovers_channel_from_any_start() {
        let s = schedule();
        let p = dft_pilots(2);
        let mut rng = stream_rng(3, 0, 0);
        let h = complex_gaussian(4, 2, &mut rng);
        let w = complex_gaussian(4, 2, &mut rng);
        for t in 1..=s.timesteps() {
            let eta2 = 1.0 / s.snr(t).unwrap();
            let obs = observe_with_noise(&h, &p, eta2, &w).unwrap();
            let oracle = PosteriorOracle {
                h0: fft2(&h),
                calls: Cell::new(0),
            };
            let trace = estimate_channel(&obs, &oracle, &s).unwrap();
            assert_eq!(trace.matched_step, t);
            assert_eq!(oracle.calls.get(), t);
            assert!(trace.estimate.sub(&h).unwrap().frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn trace_lengths_and_monotone_entry_steps() {
        let s = schedule();
        let p = dft_pilots(2);
        let mut rng = stream_rng(4, 0, 0);
        let h = complex_gaussian(4, 2, &mut rng);
        let w = complex_gaussian(4, 2, &mut rng);
        let mut last = usize::MAX;
        for snr_db in (-20..=45).step_by(5) {
            let eta2 = 10f64.powf(-snr_db as f64 / 10.0);
            let obs = observe_with_noise(&h, &p, eta2, &w).unwrap();
            let trace = estimate_channel(&obs, &Identity, &s).unwrap();
            assert_eq!(trace.latents.len(), trace.matched_step + 1);
            assert!(trace.matched_step <= last);
            last = trace.matched_step;
        }
        assert_eq!(last, 1);
    }

    #[test]
    fn batched_equals_single_and_is_deterministic() {
        let s = schedule();
        let p = dft_pilots(2);
        let mut rng = stream_rng(5, 0, 0);
        let obs: Vec<_> = [0.01, 0.3, 0.01, 2.0]
            .iter()
            .map(|&e| observe(&complex_gaussian(4, 2, &mut rng), &p, e, &mut rng).unwrap())
            .collect();
        let oracle = PosteriorOracle {
            h0: complex_gaussian(4, 2, &mut rng),
            calls: Cell::new(0),
        };
        let batch = estimate_channels(&obs, &oracle, &s).unwrap();
        for (o, b) in obs.iter().zip(&batch) {
            let single = estimate_channel(o, &oracle, &s).unwrap();
            assert_eq!(&single, b);
        }
    }

    #[test]
    fn normalised_latent_has_unit_variance() {
        let s = schedule();
        let p = dft_pilots(4);
        let dft = Dft2::new(8, 4);
        let mut rng = stream_rng(6, 0, 0);
        for eta2 in [0.05, 0.5, 3.0] {
            let mut acc = 0.0;
            let trials = 4000;
            for _ in 0..trials {
                let h = complex_gaussian(8, 4, &mut rng);
                let obs = observe(&h, &p, eta2, &mut rng).unwrap();
                acc += initial_latent(&obs, &dft).unwrap().frobenius_norm_sqr() / 32.0;
            }
            let var = acc / trials as f64;
            assert!((var - 1.0).abs() < 0.02, "{var}");
        }
        let _ = s;
    }

    #[test]
    fn dimension_mismatch_rejected() {
        struct Fixed;
        impl Denoiser for Fixed {
            fn dims(&self) -> Option<(usize, usize)> {
                Some((16, 4))
            }
            fn predict_mean(
                &self,
                l: &ComplexMatrix,
                _: usize,
                _: &NoiseSchedule,
            ) -> Result<ComplexMatrix> {
                Ok(l.clone())
            }
        }
        let mut rng = stream_rng(7, 0, 0);
        let obs = observe(
            &complex_gaussian(4, 2, &mut rng),
            &dft_pilots(2),
            0.1,
            &mut rng,
        )
        .unwrap();
        assert!(matches!(
            estimate_channel(&obs, &Fixed, &schedule()),
            Err(Error::Shape { .. })
        ));
    }
}
