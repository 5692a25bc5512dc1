//! `DMCE` dataset container.
//!
//! ```text
//! magic   "DMCE"                      4 bytes
//! version u16 = 1
//! n_rx    u16
//! n_tx    u16
//! m       u32                         number of records
//! meta    u32 length + JSON           DatasetMeta
//! m × record:
//!   H     n_rx·n_tx × (re f64, im f64), row-major
//!   C_rx  n_rx·n_rx × (re f64, im f64), row-major
//!   C_tx  n_tx·n_tx × (re f64, im f64), row-major
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use super::dataset::{ChannelDataset, ChannelSample, DatasetMeta};
use super::model::ChannelCovariance;
use crate::error::{Error, Result};
use crate::io::{read_file, Reader, Writer};

pub const DATASET_MAGIC: &[u8; 4] = b"DMCE";
pub const DATASET_VERSION: u16 = 1;

pub fn encode_dataset(ds: &ChannelDataset) -> Result<Vec<u8>> {
    let (n_rx, n_tx) = (ds.n_rx, ds.n_tx);
    if n_rx > u16::MAX as usize || n_tx > u16::MAX as usize || ds.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument(
            "dataset dimensions exceed container limits".into(),
        ));
    }
    let mut w = Writer::new(DATASET_MAGIC, DATASET_VERSION);
    w.u16(n_rx as u16);
    w.u16(n_tx as u16);
    w.u32(ds.len() as u32);
    w.json(&ds.meta)?;
    for s in &ds.samples {
        if s.channel.shape() != (n_rx, n_tx) || s.covariance.dims() != (n_rx, n_tx) {
            return Err(Error::shape(
                format!("{n_rx}x{n_tx} sample"),
                format!("{:?}", s.channel.shape()),
            ));
        }
        w.complex(s.channel.as_slice());
        w.complex(s.covariance.rx.as_slice());
        w.complex(s.covariance.tx.as_slice());
    }
    Ok(w.into_bytes())
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<ChannelDataset> {
    let mut r = Reader::open(bytes, DATASET_MAGIC, DATASET_VERSION, "dataset", path)?;
    let n_rx = r.u16()? as usize;
    let n_tx = r.u16()? as usize;
    let m = r.u32()? as usize;
    let meta: DatasetMeta = r.json()?;
    let mut samples = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let channel = r.matrix(n_rx, n_tx)?;
        let rx = r.matrix(n_rx, n_rx)?;
        let tx = r.matrix(n_tx, n_tx)?;
        samples.push(ChannelSample {
            channel,
            covariance: ChannelCovariance { rx, tx },
        });
    }
    r.finish()?;
    Ok(ChannelDataset {
        n_rx,
        n_tx,
        meta,
        samples,
    })
}

pub fn save_dataset(ds: &ChannelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(ds)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ChannelDataset> {
    let path = path.as_ref();
    decode_dataset(&read_file(path)?, path)
}
