//! `DMNW` weight container.
//!
//! ```text
//! magic   "DMNW"                 4 bytes
//! version u16 = 1
//! config  u32 length + JSON      NetConfig
//! count   u64                    number of parameters
//! values  count × f64
//! ```
//! Values follow the storage order of [`DMNetParams::groups`]: each encoder convolution
//! (weights `[out, in, 3, 3]`, then bias), the embedding projection (weights
//! `[2·c_max, c_init]`, then bias), then each decoder convolution. Little-endian throughout.

use std::path::Path;

use super::params::{DMNetParams, NetConfig};
use crate::error::{Error, Result};
use crate::io::{read_file, Reader, Writer};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"DMNW";
pub const WEIGHTS_VERSION: u16 = 1;

fn writer(params: &DMNetParams) -> Result<Writer> {
    let mut w = Writer::new(WEIGHTS_MAGIC, WEIGHTS_VERSION);
    w.json(params.config())?;
    w.u64(params.count_params() as u64);
    w.f64s(params.values());
    Ok(w)
}

pub fn encode_params(params: &DMNetParams) -> Result<Vec<u8>> {
    Ok(writer(params)?.into_bytes())
}

pub fn decode_params(bytes: &[u8], path: &Path) -> Result<DMNetParams> {
    let mut r = Reader::open(bytes, WEIGHTS_MAGIC, WEIGHTS_VERSION, "weights", path)?;
    let config: NetConfig = r.json()?;
    config.validate().map_err(|e| r.corrupt(e.to_string()))?;
    let count = r.u64()? as usize;
    if count != config.param_count() {
        return Err(r.corrupt(format!(
            "header announces {count} parameters, config implies {}",
            config.param_count()
        )));
    }
    let values = r.f64s(count)?;
    r.finish()?;
    DMNetParams::from_values(config, values)
}

pub fn save_params(params: &DMNetParams, path: impl AsRef<Path>) -> Result<()> {
    writer(params)?.write_to(path.as_ref())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<DMNetParams> {
    let path = path.as_ref();
    decode_params(&read_file(path)?, path)
}

/// Loads weights and insists they were trained for `expected`.
pub fn load_params_for(path: impl AsRef<Path>, expected: &NetConfig) -> Result<DMNetParams> {
    let params = load_params(&path)?;
    if params.config() != expected {
        return Err(Error::ConfigMismatch(format!(
            "{} holds a network for {:?}, expected {:?}",
            path.as_ref().display(),
            params.config(),
            expected
        )));
    }
    Ok(params)
}
