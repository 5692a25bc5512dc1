//! File-based steps of an experiment. Each step reads its inputs from the output
//! directory, writes its artifacts there, and records a `manifest_<step>.json`.

use super::config::ExperimentConfig;
use super::manifest::*;
use super::report::{write_csv, MatchedStepRow, TSweepRow};
use super::runs::{
    fit_baselines, generate_test_data, generate_training_data, run_intermediate_mse,
    run_matched_steps, run_mse_vs_snr, run_mse_vs_t, splits_disjoint, train_network, Baselines,
};
use crate::channels::{load_dataset, save_dataset};
use crate::dmnet::{load_params_for, save_params, DMNetParams, EpochRecord};
use crate::error::{Error, Result};

fn start(step: &str, cfg: &ExperimentConfig) -> Result<(OutputLayout, RunManifest)> {
    cfg.validate()?;
    let layout = OutputLayout::new(cfg);
    layout.create()?;
    Ok((layout, RunManifest::new(step, cfg)))
}

fn finish(layout: &OutputLayout, manifest: RunManifest) -> Result<RunManifest> {
    manifest.write(&layout.dir)?;
    Ok(manifest)
}

fn load_net(
    layout: &OutputLayout,
    cfg: &ExperimentConfig,
    timesteps: usize,
    m: &mut RunManifest,
) -> Result<DMNetParams> {
    let name = weights_file(timesteps);
    let path = layout.require(&name)?;
    m.input(&name, &path)?;
    load_params_for(&path, &cfg.net_config())
}

pub fn gen_data(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let (layout, mut m) = start("gen-data", cfg)?;
    let train = generate_training_data(cfg)?;
    let test = generate_test_data(cfg)?;
    if !splits_disjoint(&train, &test) {
        return Err(Error::InvalidArgument(
            "training and test sets overlap".into(),
        ));
    }
    for (name, ds) in [(TRAIN_DATA, &train), (TEST_DATA, &test)] {
        let p = layout.path(name);
        save_dataset(ds, &p)?;
        m.output(name, &p)?;
    }
    finish(&layout, m)
}

/// Trains the network for a `timesteps`-step schedule (the configured one if `None`).
pub fn train_step<F: FnMut(&EpochRecord)>(
    cfg: &ExperimentConfig,
    timesteps: Option<usize>,
    on_epoch: F,
) -> Result<RunManifest> {
    let (layout, mut m) = start("train", cfg)?;
    let t = timesteps.unwrap_or(cfg.schedule.timesteps);
    let data_path = layout.require(TRAIN_DATA)?;
    m.input(TRAIN_DATA, &data_path)?;
    let data = load_dataset(&data_path)?;
    let outcome = train_network(cfg, &data, &cfg.noise_schedule_with(t)?, on_epoch)?;
    let name = weights_file(t);
    let p = layout.path(&name);
    save_params(&outcome.params, &p)?;
    m.output(&name, &p)?;
    let hist = layout.path(&format!("T{t}_{TRAIN_HISTORY}"));
    write_csv(&outcome.history, &hist)?;
    m.output(&format!("T{t}_{TRAIN_HISTORY}"), &hist)?;
    m.command = format!("train_T{t}");
    finish(&layout, m)
}

pub fn fit_baselines_step(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let (layout, mut m) = start("fit-baselines", cfg)?;
    let data_path = layout.require(TRAIN_DATA)?;
    m.input(TRAIN_DATA, &data_path)?;
    let b = fit_baselines(cfg, &load_dataset(&data_path)?)?;
    let (s, g) = (layout.path(SCOV_MODEL), layout.path(GMM_MODEL));
    b.save(&s, &g)?;
    m.output(SCOV_MODEL, &s)?;
    m.output(GMM_MODEL, &g)?;
    finish(&layout, m)
}

/// Writes `mse_vs_snr.csv` and `intermediate_mse.csv`.
pub fn eval_snr_step(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let (layout, mut m) = start("eval-snr", cfg)?;
    let net = load_net(&layout, cfg, cfg.schedule.timesteps, &mut m)?;
    let mut inputs = Vec::new();
    for name in [TEST_DATA, SCOV_MODEL, GMM_MODEL] {
        let p = layout.require(name)?;
        m.input(name, &p)?;
        inputs.push(p);
    }
    let test = load_dataset(&inputs[0])?;
    let b = Baselines::load(&inputs[1], &inputs[2])?;
    let (report, steps) = run_mse_vs_snr(cfg, &net, &b, &test)?;
    for (name, res) in [
        (MSE_VS_SNR, write_csv(&report.rows, layout.path(MSE_VS_SNR))),
        (
            INTERMEDIATE_MSE,
            write_csv(&steps.rows, layout.path(INTERMEDIATE_MSE)),
        ),
    ] {
        res?;
        m.output(name, &layout.path(name))?;
    }
    finish(&layout, m)
}

pub fn eval_steps_step(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let (layout, mut m) = start("eval-steps", cfg)?;
    let net = load_net(&layout, cfg, cfg.schedule.timesteps, &mut m)?;
    let p = layout.require(TEST_DATA)?;
    m.input(TEST_DATA, &p)?;
    let steps = run_intermediate_mse(cfg, &net, &load_dataset(&p)?)?;
    let out = layout.path(INTERMEDIATE_MSE);
    write_csv(&steps.rows, &out)?;
    m.output(INTERMEDIATE_MSE, &out)?;
    finish(&layout, m)
}

/// Evaluates one network per entry of `t_list`. With `train_missing`, absent weights
/// are trained first; otherwise a missing file is an error naming its path.
pub fn eval_t_step<F: FnMut(usize, &EpochRecord)>(
    cfg: &ExperimentConfig,
    train_missing: bool,
    mut on_epoch: F,
) -> Result<(RunManifest, Vec<TSweepRow>)> {
    let (layout, mut m) = start("eval-T", cfg)?;
    let p = layout.require(TEST_DATA)?;
    m.input(TEST_DATA, &p)?;
    let test = load_dataset(&p)?;
    let rows = run_mse_vs_t(cfg, &test, &cfg.t_list, |t, _| {
        if train_missing && !layout.path(&weights_file(t)).is_file() {
            train_step(cfg, Some(t), |r| on_epoch(t, r))?;
        }
        load_net(&layout, cfg, t, &mut m)
    })?;
    let out = layout.path(MSE_VS_T);
    write_csv(&rows, &out)?;
    m.output(MSE_VS_T, &out)?;
    Ok((finish(&layout, m)?, rows))
}

pub fn eval_tmatch_step(cfg: &ExperimentConfig) -> Result<(RunManifest, Vec<MatchedStepRow>)> {
    let (layout, mut m) = start("eval-tmatch", cfg)?;
    let rows = run_matched_steps(cfg)?;
    let out = layout.path(MATCHED_STEPS);
    write_csv(&rows, &out)?;
    m.output(MATCHED_STEPS, &out)?;
    Ok((finish(&layout, m)?, rows))
}
