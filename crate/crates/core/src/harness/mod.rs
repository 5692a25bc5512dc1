//! Experiment configuration, evaluation sweeps and result files.

mod config;
mod manifest;
mod pipeline;
mod report;
mod runs;

pub use config::{ExperimentConfig, NetWidths, OUT_DIR_ENV};
pub use manifest::{
    sha256_file, weights_file, OutputLayout, RunManifest, GMM_MODEL, INTERMEDIATE_MSE,
    MATCHED_STEPS, MSE_VS_SNR, MSE_VS_T, SCOV_MODEL, TEST_DATA, TRAIN_DATA, TRAIN_HISTORY,
};
pub use pipeline::{
    eval_snr_step, eval_steps_step, eval_t_step, eval_tmatch_step, fit_baselines_step, gen_data,
    train_step,
};
pub use report::{
    read_csv, write_csv, MatchedStepRow, MseReport, MseRow, MseStat, StepReport, StepRow, TSweepRow,
};
pub use runs::{
    evaluate_grid, evaluate_snr, fit_baselines, generate_test_data, generate_training_data,
    observations, run_intermediate_mse, run_matched_steps, run_mse_vs_snr, run_mse_vs_t,
    snr_to_noise_variance, splits_disjoint, summarize, train_network, Baselines, SnrEvaluation, DM,
    GENIE, GMM, LS, SCOV,
};
