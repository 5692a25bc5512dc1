use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::draw_noising;
use super::optim::{adam_step, AdamConfig, AdamState};
use super::params::{DMNetParams, NetConfig};
use crate::channels::ChannelDataset;
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numerics::{stream_rng, ComplexMatrix, Dft2};

const INIT_DOMAIN: u64 = 0x10;
const SHUFFLE_DOMAIN: u64 = 0x11;
const NOISE_DOMAIN: u64 = 0x12;
const VALIDATION_DOMAIN: u64 = 0x13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the base rate to zero over all optimiser steps.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    /// Share of the dataset held out for model selection, in `[0, 1)`.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            optimizer: AdamConfig {
                learning_rate: 2e-3,
                ..AdamConfig::default()
            },
            lr_schedule: LrSchedule::Cosine,
            seed: 0,
            validation_fraction: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        self.optimizer.validate()
    }
}

/// Progress after one epoch; epoch 0 describes the initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss (last epoch without a validation split).
    pub params: DMNetParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Fixed noising draws so validation losses are comparable across epochs.
struct Validation {
    h0: Vec<ComplexMatrix>,
    steps: Vec<usize>,
    noise: Vec<ComplexMatrix>,
}

impl Validation {
    fn loss(&self, params: &DMNetParams, schedule: &NoiseSchedule, batch: usize) -> Result<f64> {
        let mut acc = 0.0;
        for ((h, s), e) in self
            .h0
            .chunks(batch)
            .zip(self.steps.chunks(batch))
            .zip(self.noise.chunks(batch))
        {
            acc += params.loss_at(h, s, e, schedule)? * h.len() as f64;
        }
        Ok(acc / self.h0.len() as f64)
    }
}

fn learning_rate(config: &TrainConfig, step: usize, total: usize) -> f64 {
    let base = config.optimizer.learning_rate;
    match config.lr_schedule {
        LrSchedule::Constant => base,
        LrSchedule::Cosine => {
            0.5 * base * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos())
        }
    }
}

/// Fits the denoiser on the angular-domain transform of `dataset`.
pub fn train<F: FnMut(&EpochRecord)>(
    dataset: &ChannelDataset,
    schedule: &NoiseSchedule,
    net: &NetConfig,
    config: &TrainConfig,
    on_epoch: F,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    if (dataset.n_rx, dataset.n_tx) != (net.n_rx, net.n_tx) {
        return Err(Error::ConfigMismatch(format!(
            "dataset is {}x{} but the network expects {}x{}",
            dataset.n_rx, dataset.n_tx, net.n_rx, net.n_tx
        )));
    }
    let dft = Dft2::new(dataset.n_rx, dataset.n_tx);
    let latents: Vec<ComplexMatrix> = dataset.channels().map(|h| dft.forward(h)).collect();
    train_latents(latents, schedule, net, config, on_epoch)
}

/// Fits the denoiser on samples that are already in the angular domain.
pub fn train_latents<F: FnMut(&EpochRecord)>(
    mut latents: Vec<ComplexMatrix>,
    schedule: &NoiseSchedule,
    net: &NetConfig,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome> {
    config.validate()?;
    net.validate()?;
    if latents.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    if let Some(bad) = latents.iter().find(|h| h.shape() != (net.n_rx, net.n_tx)) {
        return Err(Error::ConfigMismatch(format!(
            "sample is {}x{} but the network expects {}x{}",
            bad.rows(),
            bad.cols(),
            net.n_rx,
            net.n_tx
        )));
    }

    let n_val = (latents.len() as f64 * config.validation_fraction).floor() as usize;
    let n_val = n_val.min(latents.len() - 1);
    let val_h0 = latents.split_off(latents.len() - n_val);
    let validation = (!val_h0.is_empty()).then(|| {
        let mut rng = stream_rng(config.seed, VALIDATION_DOMAIN, 0);
        let (steps, noise) = draw_noising(val_h0.len(), net.n_rx, net.n_tx, schedule, &mut rng);
        Validation {
            h0: val_h0,
            steps,
            noise,
        }
    });

    let mut params = DMNetParams::init(net.clone(), &mut stream_rng(config.seed, INIT_DOMAIN, 0))?;
    let mut state = AdamState::new(params.count_params());
    let batches_per_epoch = latents.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;

    let initial = EpochRecord {
        epoch: 0,
        train_loss: None,
        val_loss: validation
            .as_ref()
            .map(|v| v.loss(&params, schedule, config.batch_size))
            .transpose()?,
        learning_rate: learning_rate(config, 0, total_steps),
    };
    on_epoch(&initial);
    let mut best = (initial.val_loss.unwrap_or(f64::INFINITY), 0, params.clone());
    let mut history = vec![initial];

    let mut order: Vec<usize> = (0..latents.len()).collect();
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut stream_rng(config.seed, SHUFFLE_DOMAIN, epoch as u64));
        let mut noise_rng = stream_rng(config.seed, NOISE_DOMAIN, epoch as u64);
        let mut acc = 0.0;
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<ComplexMatrix> = chunk.iter().map(|&i| latents[i].clone()).collect();
            let (loss, mut grads) = params.loss_and_grad(&batch, schedule, &mut noise_rng)?;
            if !loss.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "training diverged at epoch {epoch}"
                )));
            }
            acc += loss * batch.len() as f64;
            lr = learning_rate(config, step, total_steps);
            adam_step(&mut params, &mut grads, &mut state, &config.optimizer, lr)?;
            step += 1;
        }
        let val_loss = validation
            .as_ref()
            .map(|v| v.loss(&params, schedule, config.batch_size))
            .transpose()?;
        let record = EpochRecord {
            epoch,
            train_loss: Some(acc / latents.len() as f64),
            val_loss,
            learning_rate: lr,
        };
        on_epoch(&record);
        let score = val_loss.unwrap_or(f64::NEG_INFINITY);
        if score < best.0 || (val_loss.is_none() && epoch == config.epochs) {
            best = (score, epoch, params.clone());
        }
        history.push(record);
    }

    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        history,
    })
}
