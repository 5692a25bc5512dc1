//! Compares backpropagated gradients with central differences for every parameter group.
//!
//! `cargo run --release --example gradient_check`

use dmce::channels::{generate_dataset, ChannelModelConfig, Split};
use dmce::diffusion::ScheduleConfig;
use dmce::dmnet::{draw_noising, gradient_check, DMNetParams, NetConfig};
use dmce::numerics::{fft2, stream_rng};

fn main() -> dmce::Result<()> {
    let config = NetConfig {
        n_rx: 4,
        n_tx: 2,
        ..NetConfig::default()
    };
    let schedule = ScheduleConfig::default().build()?;
    let params = DMNetParams::init(config, &mut stream_rng(3, 0, 0))?;
    let ds = generate_dataset(&ChannelModelConfig::default(), 4, 2, 2, 3, Split::Train)?;
    let h0: Vec<_> = ds.channels().map(fft2).collect();
    let (steps, noise) = draw_noising(2, 4, 2, &schedule, &mut stream_rng(3, 1, 0));
    let checks = gradient_check(&params, &h0, &steps, &noise, &schedule, 1e-6, Some(20))?;
    for c in &checks {
        println!(
            "{:<20} {:>4} entries  max rel. error {:.2e}",
            c.name, c.checked, c.max_relative_error
        );
    }
    Ok(())
}
