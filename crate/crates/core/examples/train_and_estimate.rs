//! Trains a reduced denoiser on a small channel set, saves it, reloads it and
//! estimates a held-out channel, printing the error of every reverse-process iterate.
//!
//! `cargo run --release --example train_and_estimate`

use dmce::channels::{dft_pilots, generate_dataset, observe, ChannelModelConfig, Split};
use dmce::diffusion::{estimate_channel, ScheduleConfig};
use dmce::dmnet::{load_params_for, save_params, train, NetConfig, TrainConfig};
use dmce::numerics::{ifft2, stream_rng};

fn main() -> anyhow::Result<()> {
    let model = ChannelModelConfig::default();
    let train_set = generate_dataset(&model, 16, 4, 2_000, 0, Split::Train)?;
    let test_set = generate_dataset(&model, 16, 4, 1, 0, Split::Test)?;
    let schedule = ScheduleConfig::default().build()?;
    let net = NetConfig::default();
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let outcome = train(&train_set, &schedule, &net, &config, |r| {
        println!(
            "epoch {}  val loss {:.4}",
            r.epoch,
            r.val_loss.unwrap_or(f64::NAN)
        );
    })?;

    let path = std::env::temp_dir().join("dmce_example.dmnw");
    save_params(&outcome.params, &path)?;
    let params = load_params_for(&path, &net)?;

    let h = &test_set.samples[0].channel;
    let eta2: f64 = 0.1;
    let obs = observe(h, &dft_pilots(4), eta2, &mut stream_rng(9, 0, 0))?;
    let trace = estimate_channel(&obs, &params, &schedule)?;
    let n = h.len() as f64;
    for (i, latent) in trace.latents.iter().enumerate() {
        let t = trace.matched_step - i;
        println!(
            "t = {t:>2}  nmse = {:.4}",
            ifft2(latent).sub(h)?.frobenius_norm_sqr() / n
        );
    }
    println!("noise variance {eta2}, least squares would give about that much error");
    Ok(())
}
