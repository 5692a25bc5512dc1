use std::collections::HashSet;
use std::path::Path;

use num_complex::Complex64;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{MatchedStepRow, MseReport, MseRow, MseStat, StepReport, StepRow, TSweepRow};
use crate::baselines::{
    fit_gmm, ls_estimate, sample_covariance, stack_columns, unstack_columns, GmmFilter, GmmModel,
    LmmseFilter,
};
use crate::channels::{
    dft_pilots, generate_dataset, observe, ChannelDataset, PilotObservation, Split,
};
use crate::diffusion::{estimate_channels, Denoiser, NoiseSchedule};
use crate::dmnet::{train, DMNetParams, EpochRecord, TrainOutcome};
use crate::error::{Error, Result};
use crate::numerics::{stream_rng, ComplexMatrix, Dft2};

/// Estimator labels used in reports.
pub const LS: &str = "ls";
pub const DM: &str = "dm";
pub const SCOV: &str = "scov";
pub const GENIE: &str = "genie";
pub const GMM: &str = "gmm";

const NOISE_DOMAIN: u64 = 0x6e6f_6973_6500_0000;
const GMM_DOMAIN: u64 = 0x676d_6d00;

/// Fitted classical priors.
#[derive(Debug, Clone)]
pub struct Baselines {
    pub scov: ComplexMatrix,
    pub gmm: GmmModel,
}

impl Baselines {
    /// Writes the sample covariance as a one-component zero-mean mixture, and the GMM.
    pub fn save(&self, scov_path: &Path, gmm_path: &Path) -> Result<()> {
        let n = self.scov.rows();
        GmmModel {
            weights: vec![1.0],
            means: vec![vec![Complex64::new(0.0, 0.0); n]],
            covariances: vec![self.scov.clone()],
            log_likelihood: Vec::new(),
            converged: true,
        }
        .save(scov_path)?;
        self.gmm.save(gmm_path)
    }

    pub fn load(scov_path: &Path, gmm_path: &Path) -> Result<Self> {
        let scov = GmmModel::load(scov_path)?;
        if scov.components() != 1 {
            return Err(Error::InvalidArgument(format!(
                "{} holds {} components, expected 1",
                scov_path.display(),
                scov.components()
            )));
        }
        Ok(Self {
            scov: scov.covariances.into_iter().next().expect("one component"),
            gmm: GmmModel::load(gmm_path)?,
        })
    }
}

pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn generate_training_data(cfg: &ExperimentConfig) -> Result<ChannelDataset> {
    generate_dataset(
        &cfg.channel,
        cfg.n_rx,
        cfg.n_tx,
        cfg.train_size,
        cfg.seed,
        Split::Train,
    )
}

pub fn generate_test_data(cfg: &ExperimentConfig) -> Result<ChannelDataset> {
    generate_dataset(
        &cfg.channel,
        cfg.n_rx,
        cfg.n_tx,
        cfg.test_size,
        cfg.seed,
        Split::Test,
    )
}

/// True when no channel realisation occurs in both sets (compared bit for bit).
pub fn splits_disjoint(a: &ChannelDataset, b: &ChannelDataset) -> bool {
    let key = |h: &ComplexMatrix| -> Vec<u64> {
        h.as_slice()
            .iter()
            .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
            .collect()
    };
    let seen: HashSet<Vec<u64>> = a.channels().map(key).collect();
    b.channels().all(|h| !seen.contains(&key(h)))
}

pub fn train_network<F: FnMut(&EpochRecord)>(
    cfg: &ExperimentConfig,
    data: &ChannelDataset,
    schedule: &NoiseSchedule,
    on_epoch: F,
) -> Result<TrainOutcome> {
    train(
        data,
        schedule,
        &cfg.net_config(),
        &cfg.train_config(),
        on_epoch,
    )
}

pub fn fit_baselines(cfg: &ExperimentConfig, data: &ChannelDataset) -> Result<Baselines> {
    let scov = sample_covariance(data)?;
    let gmm = fit_gmm(data, &cfg.gmm, &mut stream_rng(cfg.seed, GMM_DOMAIN, 0))?;
    Ok(Baselines { scov, gmm })
}

/// Observations of every test channel at one SNR. Noise depends only on the seed, the
/// SNR value and the sample index, so every estimator and every sweep sees the same draws.
pub fn observations(
    cfg: &ExperimentConfig,
    test: &ChannelDataset,
    snr_db: f64,
) -> Result<Vec<PilotObservation>> {
    let eta2 = snr_to_noise_variance(snr_db);
    let pilots = dft_pilots(test.n_tx);
    let key = (snr_db * 1000.0).round() as i64 as u64;
    test.samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = stream_rng(cfg.seed ^ NOISE_DOMAIN, key, i as u64);
            observe(&s.channel, &pilots, eta2, &mut rng)
        })
        .collect()
}

fn nmse(estimate: &ComplexMatrix, truth: &ComplexMatrix) -> Result<f64> {
    Ok(estimate.sub(truth)?.frobenius_norm_sqr() / truth.len() as f64)
}

fn errors(estimates: &[ComplexMatrix], test: &ChannelDataset) -> Result<Vec<f64>> {
    estimates
        .iter()
        .zip(test.channels())
        .map(|(e, h)| nmse(e, h))
        .collect()
}

/// Per-trial errors of every estimator at one SNR.
#[derive(Debug, Clone)]
pub struct SnrEvaluation {
    pub snr_db: f64,
    /// `(estimator, per-trial normalised squared errors)`.
    pub errors: Vec<(String, Vec<f64>)>,
    pub matched_step: Option<usize>,
    /// `step_errors[t]`: per-trial errors of `ifft2(Ĥ_t)`, for `t = 0..=t̂`.
    pub step_errors: Vec<Vec<f64>>,
}

impl SnrEvaluation {
    pub fn errors_of(&self, estimator: &str) -> Option<&[f64]> {
        self.errors
            .iter()
            .find(|(n, _)| n == estimator)
            .map(|(_, e)| e.as_slice())
    }

    pub fn stat(&self, estimator: &str) -> Option<MseStat> {
        self.errors_of(estimator).map(MseStat::from_errors)
    }
}

/// Runs the requested estimators on the same observations.
pub fn evaluate_snr<D: Denoiser + ?Sized>(
    cfg: &ExperimentConfig,
    schedule: &NoiseSchedule,
    net: Option<&D>,
    baselines: Option<&Baselines>,
    test: &ChannelDataset,
    snr_db: f64,
) -> Result<SnrEvaluation> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let obs = observations(cfg, test, snr_db)?;
    let eta2 = snr_to_noise_variance(snr_db);
    let (r, c) = (test.n_rx, test.n_tx);
    let ls: Vec<ComplexMatrix> = obs.iter().map(ls_estimate).collect::<Result<_>>()?;
    let mut out = SnrEvaluation {
        snr_db,
        errors: vec![(LS.into(), errors(&ls, test)?)],
        matched_step: None,
        step_errors: Vec::new(),
    };

    if let Some(net) = net {
        let traces = estimate_channels(&obs, net, schedule)?;
        let t_hat = traces[0].matched_step;
        let dft = Dft2::new(r, c);
        let mut steps = vec![Vec::with_capacity(traces.len()); t_hat + 1];
        for (trace, h) in traces.iter().zip(test.channels()) {
            for (i, latent) in trace.latents.iter().enumerate() {
                steps[t_hat - i].push(nmse(&dft.inverse(latent), h)?);
            }
        }
        let finals: Vec<ComplexMatrix> = traces.into_iter().map(|t| t.estimate).collect();
        out.errors.push((DM.into(), errors(&finals, test)?));
        out.matched_step = Some(t_hat);
        out.step_errors = steps;
    }

    if let Some(b) = baselines {
        let y = stack_columns(&ls)?;
        let scov = unstack_columns(&LmmseFilter::new(&b.scov, eta2)?.apply(&y)?, r, c)?;
        out.errors.push((SCOV.into(), errors(&scov, test)?));

        let genie: Vec<f64> = test
            .samples
            .par_iter()
            .zip(&ls)
            .map(|(s, l)| {
                let y = stack_columns(std::slice::from_ref(l))?;
                let est = LmmseFilter::new(&s.covariance.full(), eta2)?.apply(&y)?;
                nmse(&unstack_columns(&est, r, c)?.remove(0), &s.channel)
            })
            .collect::<Result<_>>()?;
        out.errors.push((GENIE.into(), genie));

        let gmm = unstack_columns(&GmmFilter::new(&b.gmm, eta2)?.apply(&y)?, r, c)?;
        out.errors.push((GMM.into(), errors(&gmm, test)?));
    }
    Ok(out)
}

fn mse_rows(cfg: &ExperimentConfig, eval: &SnrEvaluation, hash: &str) -> Vec<MseRow> {
    eval.errors
        .iter()
        .map(|(name, e)| {
            let s = MseStat::from_errors(e);
            MseRow {
                snr_db: eval.snr_db,
                estimator: name.clone(),
                nmse: s.mean,
                samples: s.samples,
                std_err: s.std_err,
                seed: cfg.seed,
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

fn step_rows(cfg: &ExperimentConfig, eval: &SnrEvaluation, hash: &str) -> Vec<StepRow> {
    let Some(t_hat) = eval.matched_step else {
        return Vec::new();
    };
    (0..=t_hat)
        .rev()
        .map(|t| {
            let s = MseStat::from_errors(&eval.step_errors[t]);
            StepRow {
                snr_db: eval.snr_db,
                matched_step: t_hat,
                t,
                nmse: s.mean,
                samples: s.samples,
                std_err: s.std_err,
                seed: cfg.seed,
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

/// Evaluations of every estimator at each grid SNR, keeping per-trial errors.
pub fn evaluate_grid(
    cfg: &ExperimentConfig,
    net: &DMNetParams,
    baselines: &Baselines,
    test: &ChannelDataset,
) -> Result<Vec<SnrEvaluation>> {
    cfg.validate()?;
    let schedule = cfg.noise_schedule()?;
    cfg.snr_db
        .iter()
        .map(|&snr| evaluate_snr(cfg, &schedule, Some(net), Some(baselines), test, snr))
        .collect()
}

/// Aggregates evaluations into the SNR table and the per-step trajectory table.
pub fn summarize(cfg: &ExperimentConfig, evals: &[SnrEvaluation]) -> (MseReport, StepReport) {
    let hash = cfg.hash();
    let mut report = MseReport::default();
    let mut steps = StepReport::default();
    for eval in evals {
        report.rows.extend(mse_rows(cfg, eval, &hash));
        steps.rows.extend(step_rows(cfg, eval, &hash));
    }
    (report, steps)
}

/// MSE of all estimators over the SNR grid, plus the per-step trajectory of the network.
pub fn run_mse_vs_snr(
    cfg: &ExperimentConfig,
    net: &DMNetParams,
    baselines: &Baselines,
    test: &ChannelDataset,
) -> Result<(MseReport, StepReport)> {
    Ok(summarize(cfg, &evaluate_grid(cfg, net, baselines, test)?))
}

/// Per-step MSE of the reverse-process iterates over the SNR grid.
pub fn run_intermediate_mse(
    cfg: &ExperimentConfig,
    net: &DMNetParams,
    test: &ChannelDataset,
) -> Result<StepReport> {
    cfg.validate()?;
    let schedule = cfg.noise_schedule()?;
    let hash = cfg.hash();
    let mut steps = StepReport::default();
    for &snr in &cfg.snr_db {
        let eval = evaluate_snr(cfg, &schedule, Some(net), None, test, snr)?;
        steps.rows.extend(step_rows(cfg, &eval, &hash));
    }
    Ok(steps)
}

/// Network MSE for each diffusion length in `t_list` at the T-sweep SNR points.
/// `network` supplies the trained parameters for a given length (training or loading).
pub fn run_mse_vs_t<F>(
    cfg: &ExperimentConfig,
    test: &ChannelDataset,
    t_list: &[usize],
    mut network: F,
) -> Result<Vec<TSweepRow>>
where
    F: FnMut(usize, &NoiseSchedule) -> Result<DMNetParams>,
{
    cfg.validate()?;
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for &t in t_list {
        let schedule = cfg.noise_schedule_with(t)?;
        let net = network(t, &schedule)?;
        for &snr in &cfg.t_sweep_snr_db {
            let eval = evaluate_snr(cfg, &schedule, Some(&net), None, test, snr)?;
            let s = eval.stat(DM).expect("network evaluated");
            rows.push(TSweepRow {
                timesteps: t,
                snr_db: snr,
                estimator: DM.into(),
                nmse: s.mean,
                samples: s.samples,
                std_err: s.std_err,
                seed: cfg.seed,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(rows)
}

/// Entry step `t̂` for each grid SNR under the configured schedule.
pub fn run_matched_steps(cfg: &ExperimentConfig) -> Result<Vec<MatchedStepRow>> {
    cfg.validate()?;
    let schedule = cfg.noise_schedule()?;
    let hash = cfg.hash();
    cfg.snr_db
        .iter()
        .map(|&snr| {
            let t = schedule.match_timestep(1.0 / snr_to_noise_variance(snr));
            Ok(MatchedStepRow {
                snr_db: snr,
                matched_step: t,
                schedule_snr_db: 10.0 * schedule.snr(t)?.log10(),
                seed: cfg.seed,
                config_hash: hash.clone(),
            })
        })
        .collect()
}
