//! Noise schedule, timestep matching and the truncated deterministic reverse process.

mod estimator;
mod schedule;

pub use estimator::{
    estimate_channel, estimate_channels, initial_latent, Denoiser, EstimationTrace,
};
pub use schedule::{NoiseSchedule, ScheduleConfig};
