use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BiasedDataset, RawDataset};
use crate::diff::Tensor;
use crate::error::{GgdError, Result};
use crate::seed::stream_rng;

/// Exponential class-count profile: class `c` keeps
/// `round(head_count * mu^(c / (C - 1)))` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongTailSpec {
    /// Tail-to-head count ratio, in `(0, 1]`.
    pub mu: f64,
    pub head_count: usize,
}

impl LongTailSpec {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(GgdError::contract("mu must be in (0,1]"));
        }
        if self.head_count < num_classes {
            return Err(GgdError::contract(format!(
                "head_count {} must be at least the class count {num_classes}",
                self.head_count
            )));
        }
        Ok(())
    }
}

pub fn long_tail_counts(spec: &LongTailSpec, num_classes: usize) -> Vec<usize> {
    (0..num_classes)
        .map(|c| {
            let exponent = if num_classes > 1 {
                c as f64 / (num_classes - 1) as f64
            } else {
                0.0
            };
            (spec.head_count as f64 * spec.mu.powf(exponent)).round() as usize
        })
        .collect()
}

/// Subsamples `raw` without replacement into a long-tailed, 3-channel set.
/// The bias attribute of every sample is its own class.
pub fn make_long_tailed(raw: &RawDataset, spec: &LongTailSpec, seed: u64) -> Result<BiasedDataset> {
    spec.validate(raw.num_classes)?;
    let counts = long_tail_counts(spec, raw.num_classes);
    let mut keep = Vec::new();
    for (class, &want) in counts.iter().enumerate() {
        let mut pool: Vec<usize> = (0..raw.len()).filter(|&i| raw.labels[i] == class).collect();
        if pool.len() < want {
            return Err(GgdError::Data(format!(
                "class {class} has {} samples, {want} required",
                pool.len()
            )));
        }
        pool.shuffle(&mut stream_rng(seed, class as u64));
        keep.extend_from_slice(&pool[..want]);
    }
    keep.sort_unstable();

    let area = raw.height() * raw.width();
    let mut data = Vec::with_capacity(keep.len() * 3 * area);
    for &i in &keep {
        let src = raw.images.row(i);
        for _ in 0..3 {
            data.extend_from_slice(src);
        }
    }
    let labels: Vec<usize> = keep.iter().map(|&i| raw.labels[i]).collect();
    BiasedDataset::new(
        Tensor::new(vec![keep.len(), 3, raw.height(), raw.width()], data)?,
        labels.clone(),
        labels,
        raw.num_classes,
        1.0,
        seed,
    )
}
