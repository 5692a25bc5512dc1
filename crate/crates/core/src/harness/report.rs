//! Result tables and their CSV files (header row, comma separated, one row per record).
//!
//! | file | columns |
//! |------|---------|
//! | `mse_vs_snr.csv` | `snr_db,estimator,nmse,samples,std_err,seed,config_hash` |
//! | `mse_vs_T.csv` | `timesteps,snr_db,estimator,nmse,samples,std_err,seed,config_hash` |
//! | `intermediate_mse.csv` | `snr_db,matched_step,t,nmse,samples,std_err,seed,config_hash` |
//! | `matched_steps.csv` | `snr_db,matched_step,schedule_snr_db,seed,config_hash` |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and standard error of per-trial normalised squared errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseStat {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl MseStat {
    pub fn from_errors(errors: &[f64]) -> Self {
        let n = errors.len();
        let mean = errors.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub snr_db: f64,
    pub estimator: String,
    pub nmse: f64,
    pub samples: usize,
    pub std_err: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// Normalised MSE per (SNR, estimator).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
}

impl MseReport {
    pub fn get(&self, snr_db: f64, estimator: &str) -> Option<&MseRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.estimator == estimator)
    }

    pub fn estimator(&self, estimator: &str) -> Vec<&MseRow> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator)
            .collect()
    }

    pub fn snrs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.snr_db) {
                v.push(r.snr_db);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSweepRow {
    pub timesteps: usize,
    pub snr_db: f64,
    pub estimator: String,
    pub nmse: f64,
    pub samples: usize,
    pub std_err: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub snr_db: f64,
    pub matched_step: usize,
    /// Step index of the iterate `Ĥ_t`; `0` is the final estimate.
    pub t: usize,
    pub nmse: f64,
    pub samples: usize,
    pub std_err: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// MSE of every intermediate reverse-process iterate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub rows: Vec<StepRow>,
}

impl StepReport {
    /// Rows of one SNR ordered from `t = t̂` down to `t = 0`.
    pub fn trajectory(&self, snr_db: f64) -> Vec<&StepRow> {
        let mut rows: Vec<&StepRow> = self.rows.iter().filter(|r| r.snr_db == snr_db).collect();
        rows.sort_by_key(|r| std::cmp::Reverse(r.t));
        rows
    }

    /// Share of adjacent step pairs (`t → t−1`) whose MSE goes up.
    pub fn non_monotone_fraction(&self, snr_db: f64) -> f64 {
        let traj = self.trajectory(snr_db);
        if traj.len() < 2 {
            return 0.0;
        }
        let ups = traj.windows(2).filter(|w| w[1].nmse > w[0].nmse).count();
        ups as f64 / (traj.len() - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedStepRow {
    pub snr_db: f64,
    pub matched_step: usize,
    /// Diffusion SNR `ᾱ/(1−ᾱ)` of the matched step, in dB.
    pub schedule_snr_db: f64,
    pub seed: u64,
    pub config_hash: String,
}

pub fn write_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(e, path))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(e, path))?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

fn csv_io(e: csv::Error, path: &Path) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::from(e)
    }
}
