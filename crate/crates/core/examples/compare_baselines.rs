//! Classical estimators on the same observations: least squares, sample-covariance
//! LMMSE, Gaussian mixture and the genie LMMSE with each sample's true covariance.
//!
//! `cargo run --release --example compare_baselines`

use dmce::baselines::GmmConfig;
use dmce::dmnet::DMNetParams;
use dmce::harness::{
    evaluate_snr, fit_baselines, generate_test_data, generate_training_data, ExperimentConfig,
};

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig {
        train_size: 5_000,
        test_size: 500,
        gmm: GmmConfig {
            components: 8,
            ..GmmConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let baselines = fit_baselines(&cfg, &generate_training_data(&cfg)?)?;
    let test = generate_test_data(&cfg)?;
    let schedule = cfg.noise_schedule()?;
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10}",
        "snr", "ls", "scov", "gmm", "genie"
    );
    for &snr in &cfg.snr_db {
        let eval = evaluate_snr(
            &cfg,
            &schedule,
            None::<&DMNetParams>,
            Some(&baselines),
            &test,
            snr,
        )?;
        let m = |name: &str| eval.stat(name).map_or(f64::NAN, |s| s.mean);
        println!(
            "{snr:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            m("ls"),
            m("scov"),
            m("gmm"),
            m("genie")
        );
    }
    Ok(())
}
