//! Conditionally Gaussian cluster channel model, datasets and pilot observations.

mod dataset;
mod format;
mod model;

pub use dataset::{
    dft_pilots, generate_dataset, observe, observe_with_noise, ChannelDataset, ChannelSample,
    DatasetMeta, PilotObservation, Split,
};
pub use format::{
    decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use model::{
    build_covariance, build_covariance_with, sample_channel, sample_cluster_params, ula_covariance,
    ChannelCovariance, ChannelModelConfig, ClusterParams,
};
