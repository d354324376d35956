//! Binary dataset container.
//!
//! Layout (little-endian): magic `GGDS`, `u32` version, `u32` classes,
//! `u64` samples, three `u32` sample dimensions, `f64` rho, `u64` seed, the
//! `f64` image payload, `u32` labels, `u32` bias attributes, and a CRC-32 of
//! everything before it.

use std::fs;
use std::path::Path;

use super::BiasedDataset;
use crate::diff::Tensor;
use crate::error::{GgdError, Result};

const MAGIC: &[u8; 4] = b"GGDS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4 * 3 + 8 + 8;

pub fn dataset_to_bytes(d: &BiasedDataset) -> Vec<u8> {
    let shape = d.images.shape();
    let n = d.len();
    let mut out = Vec::with_capacity(HEADER_LEN + d.images.len() * 8 + n * 8 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d.num_classes as u32).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for &dim in &shape[1..] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&d.rho.to_le_bytes());
    out.extend_from_slice(&d.seed.to_le_bytes());
    for v in d.images.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in d.labels.iter().chain(&d.bias_attr) {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().expect("4 bytes"))
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<BiasedDataset> {
    if bytes.len() < HEADER_LEN {
        return Err(GgdError::Format(format!(
            "dataset container of {} bytes is shorter than its header",
            bytes.len()
        )));
    }
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4) != MAGIC {
        return Err(GgdError::Format("not a dataset container (bad magic)".into()));
    }
    let version = cur.u32();
    if version != VERSION {
        return Err(GgdError::Format(format!(
            "dataset container version {version}, expected {VERSION}"
        )));
    }
    let classes = cur.u32() as usize;
    let n = cur.u64() as usize;
    let dims = [cur.u32() as usize, cur.u32() as usize, cur.u32() as usize];
    let rho = cur.f64();
    let seed = cur.u64();

    let values = dims
        .iter()
        .try_fold(n, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| GgdError::Format("dataset dimensions overflow".into()))?;
    let expected = values
        .checked_mul(8)
        .and_then(|v| v.checked_add(HEADER_LEN + n * 8 + 4))
        .ok_or_else(|| GgdError::Format("dataset dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(GgdError::Truncated(format!(
            "dataset container holds {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(GgdError::Format(format!(
            "dataset container holds {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
    if crc32fast::hash(&bytes[..expected - 4]) != stored {
        return Err(GgdError::Format("dataset container checksum mismatch".into()));
    }
    let images: Vec<f64> = (0..values).map(|_| cur.f64()).collect();
    let labels: Vec<usize> = (0..n).map(|_| cur.u32() as usize).collect();
    let bias_attr: Vec<usize> = (0..n).map(|_| cur.u32() as usize).collect();
    let images =
        Tensor::new(vec![n, dims[0], dims[1], dims[2]], images).map_err(|e| GgdError::Format(e.to_string()))?;
    BiasedDataset::new(images, labels, bias_attr, classes, rho, seed).map_err(|e| GgdError::Format(e.to_string()))
}

pub fn write_dataset(path: &Path, d: &BiasedDataset) -> Result<()> {
    fs::write(path, dataset_to_bytes(d))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<BiasedDataset> {
    dataset_from_bytes(&fs::read(path)?)
}
