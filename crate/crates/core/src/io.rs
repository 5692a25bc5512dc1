//! Shared helpers for the little-endian binary containers (`DMCE`, `DMNW`, `DMGM`).
//!
//! Every container starts with a 4-byte magic and a `u16` version; the rest of the
//! header is container specific and always includes a length-prefixed JSON blob.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u16) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u16(version);
        w
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }

    pub fn complex(&mut self, vs: &[Complex64]) {
        for z in vs {
            self.f64(z.re);
            self.f64(z.im);
        }
    }

    /// `u32` byte length followed by the UTF-8 JSON text.
    pub fn json<T: serde::Serialize>(&mut self, value: &T) -> Result<()> {
        let blob = serde_json::to_vec(value)?;
        self.u32(blob.len() as u32);
        self.buf.extend_from_slice(&blob);
        Ok(())
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    /// Checks magic and version, returning a reader positioned after them.
    pub fn open(
        bytes: &'a [u8],
        magic: &[u8; 4],
        version: u16,
        kind: &'static str,
        path: &Path,
    ) -> Result<Self> {
        let mut r = Self {
            bytes,
            pos: 0,
            kind,
            path: path.to_path_buf(),
        };
        let got = r.take(4)?;
        if got != magic {
            return Err(r.corrupt(format!("bad magic {:?}", String::from_utf8_lossy(got))));
        }
        let v = r.u16()?;
        if v != version {
            return Err(r.corrupt(format!("unsupported version {v}")));
        }
        Ok(r)
    }

    pub fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            kind: self.kind,
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.corrupt(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        (0..n)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<ComplexMatrix> {
        let data = self.complex(rows * cols)?;
        ComplexMatrix::from_vec(rows, cols, data).map_err(|e| self.corrupt(e.to_string()))
    }

    pub fn json<T: serde::de::DeserializeOwned>(&mut self) -> Result<T> {
        let len = self.u32()? as usize;
        let blob = self.take(len)?;
        serde_json::from_slice(blob).map_err(|e| self.corrupt(format!("bad JSON header: {e}")))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.corrupt(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
