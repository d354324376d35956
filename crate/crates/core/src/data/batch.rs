use crate::diff::Tensor;
use crate::error::{GgdError, Result};

/// `(labels.len(), num_classes)` indicator matrix.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(GgdError::contract(format!("label {l} outside [0, {num_classes})")));
        }
        data[i * num_classes + l] = 1.0;
    }
    Tensor::new(vec![labels.len(), num_classes], data)
}

/// A mini-batch: features, integer labels, their one-hot matrix and the
/// per-sample bias attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub onehot: Tensor,
    pub bias_attr: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(features: Tensor, labels: Vec<usize>, bias_attr: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(GgdError::contract("empty batch"));
        }
        if features.rows() != labels.len() || bias_attr.len() != labels.len() {
            return Err(GgdError::contract(format!(
                "batch of {} features, {} labels, {} bias attributes",
                features.rows(),
                labels.len(),
                bias_attr.len()
            )));
        }
        let onehot = one_hot(&labels, num_classes)?;
        Ok(LabeledBatch {
            features,
            labels,
            onehot,
            bias_attr,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.onehot.shape()[1]
    }
}
