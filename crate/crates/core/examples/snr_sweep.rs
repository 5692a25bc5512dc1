//! Reduced version of the full comparison: trains the denoiser on 5,000 channels,
//! fits the baselines and prints the normalised MSE of every estimator per SNR.
//!
//! `cargo run --release --example snr_sweep`

use dmce::harness::{
    fit_baselines, generate_test_data, generate_training_data, run_mse_vs_snr, train_network,
    ExperimentConfig,
};

fn main() -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(&[
        "train_size=5000",
        "test_size=500",
        "train.epochs=4",
        "gmm.components=8",
    ])?;
    let train = generate_training_data(&cfg)?;
    let test = generate_test_data(&cfg)?;
    let net = train_network(&cfg, &train, &cfg.noise_schedule()?, |r| {
        eprintln!(
            "epoch {} val {:.4}",
            r.epoch,
            r.val_loss.unwrap_or(f64::NAN)
        );
    })?
    .params;
    let baselines = fit_baselines(&cfg, &train)?;
    let (report, steps) = run_mse_vs_snr(&cfg, &net, &baselines, &test)?;

    let names = ["ls", "scov", "gmm", "dm", "genie"];
    print!("{:>6}", "snr");
    names.iter().for_each(|n| print!("{n:>11}"));
    println!("{:>7}", "steps");
    for snr in report.snrs() {
        print!("{snr:>6}");
        for n in names {
            print!("{:>11.3e}", report.get(snr, n).map_or(f64::NAN, |r| r.nmse));
        }
        println!(
            "{:>7}",
            steps.trajectory(snr).first().map_or(0, |r| r.matched_step)
        );
    }
    Ok(())
}
