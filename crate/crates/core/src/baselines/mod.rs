//! Reference estimators: least squares, LMMSE with sample or per-sample (genie)
//! covariance, and the Gaussian-mixture estimator.

mod gmm;
mod linear;

pub use gmm::{
    fit_gmm, fit_gmm_columns, gmm_estimate, gmm_estimate_observation, GmmConfig, GmmFilter,
    GmmModel, GMM_MAGIC, GMM_VERSION,
};
pub use linear::{
    genie_estimate, lmmse_estimate, lmmse_mse, ls_estimate, sample_covariance, scov_estimate,
    stack_columns, unstack_columns, LmmseFilter,
};
