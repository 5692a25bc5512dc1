//! Runs the reverse process with the exact forward posterior in place of a network.
//! The final estimate equals the true channel for any observation SNR.
//!
//! `cargo run --example oracle_reverse`

use dmce::channels::{dft_pilots, observe};
use dmce::diffusion::{estimate_channel, Denoiser, NoiseSchedule, ScheduleConfig};
use dmce::numerics::{complex_gaussian, fft2, stream_rng, ComplexMatrix};

struct Oracle(ComplexMatrix);

impl Denoiser for Oracle {
    fn predict_mean(
        &self,
        latent: &ComplexMatrix,
        t: usize,
        s: &NoiseSchedule,
    ) -> dmce::Result<ComplexMatrix> {
        s.posterior_mean(latent, &self.0, t)
    }
}

fn main() -> dmce::Result<()> {
    let schedule = ScheduleConfig::default().build()?;
    let mut rng = stream_rng(1, 0, 0);
    let h = complex_gaussian(16, 4, &mut rng);
    let oracle = Oracle(fft2(&h));
    for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let obs = observe(&h, &dft_pilots(4), 10f64.powf(-snr_db / 10.0), &mut rng)?;
        let trace = estimate_channel(&obs, &oracle, &schedule)?;
        let err = trace.estimate.sub(&h)?.frobenius_norm();
        println!(
            "{snr_db:>5} dB: {:>2} steps, |H_hat - H| = {err:.2e}",
            trace.matched_step
        );
    }
    Ok(())
}
