use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::baselines::GmmConfig;
use crate::channels::ChannelModelConfig;
use crate::diffusion::{NoiseSchedule, ScheduleConfig};
use crate::dmnet::{NetConfig, TrainConfig};
use crate::error::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DMCE_OUT_DIR";

/// Channel widths of the denoiser; spatial dimensions come from the experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetWidths {
    pub c_init: usize,
    pub c_max: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
}

impl Default for NetWidths {
    fn default() -> Self {
        let d = NetConfig::default();
        Self {
            c_init: d.c_init,
            c_max: d.c_max,
            encoder_hidden: d.encoder_hidden,
            decoder_hidden: d.decoder_hidden,
        }
    }
}

/// Everything one experiment needs. Serialised as JSON; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_rx: usize,
    pub n_tx: usize,
    pub channel: ChannelModelConfig,
    pub schedule: ScheduleConfig,
    pub net: NetWidths,
    /// `train.seed` is replaced by a value derived from `seed`.
    pub train: TrainConfig,
    pub gmm: GmmConfig,
    pub snr_db: Vec<f64>,
    pub train_size: usize,
    pub test_size: usize,
    /// Diffusion lengths for the `T` sweep.
    pub t_list: Vec<usize>,
    /// SNR points evaluated in the `T` sweep.
    pub t_sweep_snr_db: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_rx: 16,
            n_tx: 4,
            channel: ChannelModelConfig::default(),
            schedule: ScheduleConfig::default(),
            net: NetWidths::default(),
            train: TrainConfig::default(),
            gmm: GmmConfig::default(),
            snr_db: (-10..=30).step_by(5).map(f64::from).collect(),
            train_size: 20_000,
            test_size: 1_000,
            t_list: vec![10, 25, 50, 100],
            t_sweep_snr_db: vec![0.0, 10.0, 20.0],
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("dmce-out"), PathBuf::from)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rx == 0 || self.n_tx == 0 {
            return Err(Error::InvalidArgument(
                "antenna counts must be positive".into(),
            ));
        }
        if self.snr_db.is_empty() || !strictly_increasing(&self.snr_db) {
            return Err(Error::InvalidArgument(
                "SNR grid must be nonempty and strictly increasing".into(),
            ));
        }
        if !strictly_increasing(&self.t_sweep_snr_db) {
            return Err(Error::InvalidArgument(
                "T-sweep SNR list must be strictly increasing".into(),
            ));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidArgument(
                "dataset sizes must be positive".into(),
            ));
        }
        if self.t_list.contains(&0) {
            return Err(Error::InvalidArgument(
                "T list entries must be positive".into(),
            ));
        }
        self.channel.validate()?;
        self.schedule.build()?;
        self.net_config().validate()?;
        self.train.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sets one field by dotted path, e.g. `train.epochs=5` or `snr_db=[0, 10]`.
    /// The value is parsed as JSON and falls back to a plain string.
    pub fn apply_override(&mut self, path: &str, value: &str) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| Error::InvalidArgument(format!("unknown config field '{path}'")))?;
        }
        *node = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        *self = serde_json::from_value(root)
            .map_err(|e| Error::InvalidArgument(format!("bad value for '{path}': {e}")))?;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o.as_ref().split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("override '{}' is not key=value", o.as_ref()))
            })?;
            self.apply_override(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            n_rx: self.n_rx,
            n_tx: self.n_tx,
            c_init: self.net.c_init,
            c_max: self.net.c_max,
            encoder_hidden: self.net.encoder_hidden.clone(),
            decoder_hidden: self.net.decoder_hidden.clone(),
        }
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule> {
        self.schedule.build()
    }

    /// Schedule with the configured endpoints but `timesteps` steps.
    pub fn noise_schedule_with(&self, timesteps: usize) -> Result<NoiseSchedule> {
        ScheduleConfig {
            timesteps,
            ..self.schedule
        }
        .build()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed ^ 0x7472_6169_6e00_0000,
            ..self.train.clone()
        }
    }

    /// Hex SHA-256 (first 16 digits) of the JSON config, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_desk_sized() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.n_rx, c.n_tx, c.train_size, c.test_size),
            (16, 4, 20_000, 1_000)
        );
        assert_eq!(
            c.snr_db,
            vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        );
        assert_eq!(c.schedule.timesteps, 50);
        assert_eq!(c.net_config().param_count(), 44_658);
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(),
            c
        );
        let p = ExperimentConfig::from_json(r#"{"n_rx": 8, "train": {"epochs": 2}}"#).unwrap();
        assert_eq!(p.n_rx, 8);
        assert_eq!(p.train.epochs, 2);
        assert_eq!(p.train.batch_size, TrainConfig::default().batch_size);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn dotted_overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_overrides(&[
            "train.epochs=3",
            "snr_db=[0, 10]",
            "output_dir=/tmp/x",
            "schedule.alpha_last=0.95",
        ])
        .unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.snr_db, vec![0.0, 10.0]);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.schedule.alpha_last, 0.95);
        assert!(c.apply_override("train.nope", "1").is_err());
        assert!(c.apply_override("train.epochs", "\"many\"").is_err());
        assert!(c.apply_overrides(&["novalue"]).is_err());
    }

    #[test]
    fn validation_rejects_bad_grids() {
        for o in [
            "snr_db=[]",
            "snr_db=[10, 0]",
            "n_rx=0",
            "test_size=0",
            "t_list=[0]",
        ] {
            let mut c = ExperimentConfig::default();
            c.apply_overrides(&[o]).unwrap();
            assert!(c.validate().is_err(), "{o}");
        }
    }

    #[test]
    fn hash_tracks_content_not_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
