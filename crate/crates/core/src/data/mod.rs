//! Raw digit ingestion, biased dataset synthesis and the dataset container.

mod batch;
mod colorize;
mod container;
mod idx;
mod long_tail;
mod synthetic;

pub use batch::{one_hot, LabeledBatch};
pub use colorize::{colorize, Palette, FOREGROUND_THRESHOLD};
pub use container::{dataset_from_bytes, dataset_to_bytes, load_dataset, write_dataset};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_file, load_raw_dataset, read_idx, read_idx_prefix, IdxData,
};
pub use long_tail::{long_tail_counts, make_long_tailed, LongTailSpec};
pub use synthetic::synthetic_spurious;

use crate::diff::Tensor;
use crate::error::{GgdError, Result};

/// Grayscale source images `(N, 1, H, W)` in `[0, 1]` with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl RawDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(GgdError::Data("raw dataset is empty".into()));
        }
        if images.shape().len() != 4 || images.shape()[1] != 1 || images.rows() != labels.len() {
            return Err(GgdError::Data(format!(
                "raw images {:?} do not match {} labels as (N, 1, H, W)",
                images.shape(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(GgdError::Data(format!("label {l} outside [0, {num_classes})")));
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(GgdError::Data("raw pixel outside [0, 1]".into()));
        }
        Ok(RawDataset {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.images.shape()[3]
    }

    /// Keeps the listed samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let per = self.images.row_len();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(self.images.row(i));
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        RawDataset::new(
            Tensor::new(shape, data)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.num_classes,
        )
    }
}

/// Images with labels and a per-sample bias attribute (background colour
/// index, or group index for grouped data).
#[derive(Clone, Debug, PartialEq)]
pub struct BiasedDataset {
    /// `(N, channels, H, W)`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub bias_attr: Vec<usize>,
    pub num_classes: usize,
    pub rho: f64,
    pub seed: u64,
}

impl BiasedDataset {
    pub fn new(
        images: Tensor,
        labels: Vec<usize>,
        bias_attr: Vec<usize>,
        num_classes: usize,
        rho: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(GgdError::Data("dataset is empty".into()));
        }
        if images.shape().len() != 4 || images.rows() != n || bias_attr.len() != n {
            return Err(GgdError::Data(format!(
                "images {:?}, {} labels and {} bias attributes disagree",
                images.shape(),
                n,
                bias_attr.len()
            )));
        }
        if labels.iter().chain(&bias_attr).any(|&v| v >= num_classes) {
            return Err(GgdError::Data(format!(
                "label or bias attribute outside [0, {num_classes})"
            )));
        }
        Ok(BiasedDataset {
            images,
            labels,
            bias_attr,
            num_classes,
            rho,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shape of one sample, `(channels, H, W)`.
    pub fn sample_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    pub fn batch(&self, indices: &[usize]) -> Result<LabeledBatch> {
        if indices.is_empty() {
            return Err(GgdError::contract("empty batch"));
        }
        let per = self.images.row_len();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(self.images.row(i));
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        LabeledBatch::new(
            Tensor::new(shape, data)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.bias_attr[i]).collect(),
            self.num_classes,
        )
    }

    /// Consecutive batches covering the whole dataset in index order.
    pub fn batches(&self, size: usize) -> impl Iterator<Item = Result<LabeledBatch>> + '_ {
        let idx: Vec<usize> = (0..self.len()).collect();
        let size = size.max(1);
        (0..self.len())
            .step_by(size)
            .map(move |start| self.batch(&idx[start..(start + size).min(idx.len())]))
    }

    /// Class frequencies `count(y) / N`.
    pub fn class_prior(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1.0;
        }
        let n = self.len() as f64;
        counts.iter().map(|c| c / n).collect()
    }
}
