//! Convolutional noise-prediction network shared across all diffusion steps, with
//! its training loop, optimiser and weight files.

mod conv;
mod format;
mod gradcheck;
mod network;
mod optim;
mod params;
mod train;

pub use format::{
    decode_params, encode_params, load_params, load_params_for, save_params, WEIGHTS_MAGIC,
    WEIGHTS_VERSION,
};
pub use gradcheck::{gradient_check, GroupCheck, RELATIVE_FLOOR};
pub use network::{draw_noising, embed_time, epsilon_loss, mean_from_noise};
pub use optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use params::{conv_param_count, embedding_param_count, DMNetParams, Gradients, NetConfig};
pub use train::{train, train_latents, EpochRecord, LrSchedule, TrainConfig, TrainOutcome};
