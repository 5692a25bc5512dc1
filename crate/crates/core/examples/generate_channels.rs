//! Draws a small 3-cluster channel set and prints its covariance structure.
//!
//! `cargo run --release --example generate_channels`

use dmce::channels::{generate_dataset, ChannelModelConfig, Split};
use dmce::numerics::fft2;

fn main() -> dmce::Result<()> {
    let model = ChannelModelConfig::default();
    let ds = generate_dataset(&model, 16, 4, 2_000, 7, Split::Train)?;
    println!(
        "{} samples of {}x{}, mean energy per entry {:.4}",
        ds.len(),
        ds.n_rx,
        ds.n_tx,
        ds.mean_energy()
    );

    // each realisation concentrates its energy in a few angular bins
    let mut share = 0.0;
    for h in ds.channels() {
        let mut p: Vec<f64> = fft2(h).as_slice().iter().map(|z| z.norm_sqr()).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        share += p.iter().take(8).sum::<f64>() / p.iter().sum::<f64>() / ds.len() as f64;
    }
    println!(
        "on average the 8 strongest of 64 angular bins hold {:.1}% of a channel's energy",
        100.0 * share
    );

    let s = &ds.samples[0];
    println!(
        "sample 0: tr(C_rx) = {:.3}, tr(C_tx) = {:.3}",
        s.covariance.rx.trace().re,
        s.covariance.tx.trace().re
    );
    Ok(())
}
