//! Prints the diffusion SNR of each step and the entry step chosen for a range of
//! observation SNRs.
//!
//! `cargo run --example schedule_matching`

use dmce::diffusion::ScheduleConfig;

fn main() -> dmce::Result<()> {
    let schedule = ScheduleConfig::default().build()?;
    let db = |x: f64| 10.0 * x.log10();
    println!("T = {}", schedule.timesteps());
    for t in [1, 2, 5, 10, 20, 30, 40, 50] {
        println!(
            "  t = {t:>2}  alpha_bar = {:.5}  snr = {:>6.2} dB",
            schedule.alpha_bar(t)?,
            db(schedule.snr(t)?)
        );
    }
    for snr_db in (-10..=30).step_by(5) {
        let t = schedule.match_timestep(10f64.powf(snr_db as f64 / 10.0));
        println!("observation {snr_db:>3} dB -> {t:>2} reverse steps");
    }
    Ok(())
}
