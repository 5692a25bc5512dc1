use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dmce::dmnet::{conv_param_count, embedding_param_count, DMNetParams, EpochRecord};
use dmce::harness::{self, ExperimentConfig, RunManifest};

#[derive(Parser)]
#[command(
    name = "dmce",
    version,
    about = "Diffusion-prior MIMO channel estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.epochs=5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides the config and DMCE_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and test channel sets.
    GenData(Common),
    /// Train the denoising network.
    Train {
        #[command(flatten)]
        common: Common,
        /// Diffusion length (defaults to `schedule.timesteps`).
        #[arg(long)]
        timesteps: Option<usize>,
    },
    /// Fit the sample-covariance and Gaussian-mixture baselines.
    FitBaselines(Common),
    /// MSE of all estimators over the SNR grid.
    EvalSnr(Common),
    /// Network MSE for each diffusion length in `t_list`.
    #[command(name = "eval-T")]
    EvalT {
        #[command(flatten)]
        common: Common,
        /// Train networks whose weights are missing instead of failing.
        #[arg(long)]
        train_missing: bool,
    },
    /// MSE of every reverse-process iterate.
    EvalSteps(Common),
    /// Matched entry step for each SNR.
    EvalTmatch(Common),
    /// Parameter count of the configured network.
    ParamsCount(Common),
}

fn log_epoch(t: usize, r: &EpochRecord) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.5}"));
    eprintln!(
        "T={t} epoch {:>3}  train {}  val {}  lr {:.2e}",
        r.epoch,
        fmt(r.train_loss),
        fmt(r.val_loss),
        r.learning_rate
    );
}

fn report(m: &RunManifest, cfg: &ExperimentConfig) {
    for name in m.outputs.keys() {
        println!("wrote {}", cfg.output_dir.join(name).display());
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData(c) => {
            let cfg = c.load()?;
            report(&harness::gen_data(&cfg)?, &cfg);
        }
        Command::Train { common, timesteps } => {
            let cfg = common.load()?;
            let t = timesteps.unwrap_or(cfg.schedule.timesteps);
            report(
                &harness::train_step(&cfg, Some(t), |r| log_epoch(t, r))?,
                &cfg,
            );
        }
        Command::FitBaselines(c) => {
            let cfg = c.load()?;
            report(&harness::fit_baselines_step(&cfg)?, &cfg);
        }
        Command::EvalSnr(c) => {
            let cfg = c.load()?;
            report(&harness::eval_snr_step(&cfg)?, &cfg);
        }
        Command::EvalT {
            common,
            train_missing,
        } => {
            let cfg = common.load()?;
            let (m, _) = harness::eval_t_step(&cfg, train_missing, log_epoch)?;
            report(&m, &cfg);
        }
        Command::EvalSteps(c) => {
            let cfg = c.load()?;
            report(&harness::eval_steps_step(&cfg)?, &cfg);
        }
        Command::EvalTmatch(c) => {
            let cfg = c.load()?;
            let (m, rows) = harness::eval_tmatch_step(&cfg)?;
            for r in &rows {
                println!(
                    "{:>6.1} dB  t = {:>3}  ({:.2} dB)",
                    r.snr_db, r.matched_step, r.schedule_snr_db
                );
            }
            report(&m, &cfg);
        }
        Command::ParamsCount(c) => {
            let net = c.load()?.net_config();
            let params = DMNetParams::zeros(net.clone())?;
            for (name, range) in params.groups() {
                println!("{name:<24} {:>8}", range.len());
            }
            let conv: usize = net
                .encoder_channels()
                .into_iter()
                .chain(net.decoder_channels())
                .map(|(i, o)| conv_param_count(i, o))
                .sum();
            let emb = embedding_param_count(net.c_init, net.c_max);
            println!(
                "convolutions {conv} + embedding {emb} = {}",
                net.param_count()
            );
            assert_eq!(params.count_params(), net.param_count());
        }
    }
    Ok(())
}
