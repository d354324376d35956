//! IDX containers: big-endian magic, big-endian `u32` dimensions, raw bytes.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::RawDataset;
use crate::diff::Tensor;
use crate::error::{GgdError, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    /// `(N, 1, H, W)` pixels scaled to `[0, 1]`.
    Images(Tensor),
    Labels(Vec<usize>),
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| GgdError::Truncated(format!("IDX header ends before byte {}", offset + 4)))
}

fn payload(bytes: &[u8], header: usize, declared: usize) -> Result<&[u8]> {
    let body = &bytes[header..];
    if body.len() < declared {
        return Err(GgdError::Truncated(format!(
            "IDX payload holds {} bytes, header declares {declared}",
            body.len()
        )));
    }
    if body.len() > declared {
        return Err(GgdError::Format(format!(
            "IDX payload holds {} bytes, header declares {declared}",
            body.len()
        )));
    }
    Ok(body)
}

pub fn read_idx(bytes: &[u8]) -> Result<IdxData> {
    read_idx_prefix(bytes, usize::MAX)
}

/// Like [`read_idx`] but decodes only the first `limit` items. The full
/// payload is still validated against the header.
pub fn read_idx_prefix(bytes: &[u8], limit: usize) -> Result<IdxData> {
    match be_u32(bytes, 0)? {
        IMAGES_MAGIC => {
            let n = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            if n == 0 || rows == 0 || cols == 0 {
                return Err(GgdError::Format("IDX image dimensions must be positive".into()));
            }
            let body = payload(bytes, 16, n * rows * cols)?;
            let keep = n.min(limit);
            let pixels = body[..keep * rows * cols]
                .iter()
                .map(|&b| f64::from(b) / 255.0)
                .collect();
            Ok(IdxData::Images(Tensor::new(vec![keep, 1, rows, cols], pixels)?))
        }
        LABELS_MAGIC => {
            let n = be_u32(bytes, 4)? as usize;
            let body = payload(bytes, 8, n)?;
            Ok(IdxData::Labels(
                body[..n.min(limit)].iter().map(|&b| usize::from(b)).collect(),
            ))
        }
        other => Err(GgdError::Format(format!("unsupported IDX magic 0x{other:08x}"))),
    }
}

/// Reads an IDX file, transparently inflating gzip input.
pub fn load_idx_file(path: &Path) -> Result<IdxData> {
    load_idx_prefix(path, usize::MAX)
}

fn load_idx_prefix(path: &Path, limit: usize) -> Result<IdxData> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut inflated = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut inflated)?;
        read_idx_prefix(&inflated, limit)
    } else {
        read_idx_prefix(&raw, limit)
    }
}

pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs an image file with a label file into a 10-class [`RawDataset`],
/// keeping at most `limit` leading samples.
pub fn load_raw_dataset(images: &Path, labels: &Path, limit: Option<usize>) -> Result<RawDataset> {
    let limit = limit.unwrap_or(usize::MAX);
    let IdxData::Images(images) = load_idx_prefix(images, limit)? else {
        return Err(GgdError::Format(format!(
            "{} is not an IDX image file",
            images.display()
        )));
    };
    let IdxData::Labels(labels) = load_idx_prefix(labels, limit)? else {
        return Err(GgdError::Format(format!(
            "{} is not an IDX label file",
            labels.display()
        )));
    };
    if images.rows() != labels.len() {
        return Err(GgdError::Data(format!(
            "{} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    RawDataset::new(images, labels, 10)
}
