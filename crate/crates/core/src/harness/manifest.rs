use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// File names inside the output directory.
pub const TRAIN_DATA: &str = "train.dmcd";
pub const TEST_DATA: &str = "test.dmcd";
pub const SCOV_MODEL: &str = "scov.dmgm";
pub const GMM_MODEL: &str = "gmm.dmgm";
pub const MSE_VS_SNR: &str = "mse_vs_snr.csv";
pub const MSE_VS_T: &str = "mse_vs_T.csv";
pub const INTERMEDIATE_MSE: &str = "intermediate_mse.csv";
pub const MATCHED_STEPS: &str = "matched_steps.csv";
pub const TRAIN_HISTORY: &str = "train_history.csv";

/// Weights file of the network trained with `timesteps` diffusion steps.
pub fn weights_file(timesteps: usize) -> String {
    format!("dmnet_T{timesteps}.dmnw")
}

/// Resolves artifact names against the configured output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub dir: PathBuf,
}

impl OutputLayout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            dir: cfg.output_dir.clone(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn create(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Errors with the missing path when an input artifact is absent.
    pub fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::io(
                &p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "required artifact missing"),
            ))
        }
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one command: its config, and digests of what it read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            config: cfg.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, name: &str, path: &Path) -> Result<()> {
        self.outputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Writes `manifest_<command>.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("manifest_{}.json", self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let f = dir.path().join("a.bin");
        std::fs::write(&f, b"abc").unwrap();
        let mut m = RunManifest::new("gen-data", &cfg);
        m.output("a", &f).unwrap();
        assert_eq!(
            m.outputs["a"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let p = m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::load(p).unwrap(), m);
    }

    #[test]
    fn missing_artifact_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let layout = OutputLayout {
            dir: dir.path().to_path_buf(),
        };
        let err = layout.require(&weights_file(50)).unwrap_err().to_string();
        assert!(err.contains("dmnet_T50.dmnw"), "{err}");
    }
}
