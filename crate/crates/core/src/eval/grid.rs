use std::collections::BTreeMap;

use super::log::MetricLog;
use super::metrics::{accuracy, confusion, mean_class_accuracy, per_class_accuracy, ConfusionAxis};
use crate::data::{BiasedDataset, LabeledBatch};
use crate::diff::{Tape, Tensor};
use crate::error::{GgdError, Result};
use crate::models::Model;

const EVAL_CHUNK: usize = 500;

/// Predictions over a whole dataset, evaluated in chunks.
pub fn predict_dataset(model: &Model, data: &BiasedDataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    for batch in data.batches(EVAL_CHUNK) {
        out.extend(model.predict(&batch?)?);
    }
    Ok(out)
}

/// Logs accuracy, per-class accuracy, the share of predictions equal to the
/// bias attribute and both confusion matrices for one split. Returns accuracy.
pub fn evaluate_split(
    model: &Model,
    data: &BiasedDataset,
    split: &str,
    epoch: usize,
    log: &mut MetricLog,
) -> Result<f64> {
    let pred = predict_dataset(model, data)?;
    let c = data.num_classes;
    let acc = accuracy(&pred, &data.labels)?;
    let per_class = per_class_accuracy(&pred, &data.labels, c)?;
    log.scalar(epoch, split, "accuracy", acc);
    log.scalar(epoch, split, "mean_class_accuracy", mean_class_accuracy(&per_class));
    log.scalar(
        epoch,
        split,
        "bias_aligned_prediction",
        accuracy(&pred, &data.bias_attr)?,
    );
    log.vector(epoch, split, "per_class_accuracy", per_class);
    for (axis, reference, name) in [
        (ConfusionAxis::VsLabel, &data.labels, "confusion_vs_label"),
        (ConfusionAxis::VsBias, &data.bias_attr, "confusion_vs_bias"),
    ] {
        let m = confusion(&pred, reference, c, axis)?;
        let rows = m.counts.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        log.matrix(epoch, split, name, rows);
    }
    Ok(acc)
}

/// Accuracy of `model` on every named dataset.
pub fn evaluate_grid(
    model: &Model,
    datasets: &BTreeMap<String, BiasedDataset>,
    epoch: usize,
    log: &mut MetricLog,
) -> Result<BTreeMap<String, f64>> {
    let mut shapes = datasets.values().map(|d| (d.num_classes, d.sample_shape().to_vec()));
    if let Some(first) = shapes.next() {
        if shapes.any(|s| s != first) {
            return Err(GgdError::contract("grid datasets differ in classes or sample shape"));
        }
    }
    datasets
        .iter()
        .map(|(name, d)| Ok((name.clone(), evaluate_split(model, d, name, epoch, log)?)))
        .collect()
}

/// Gradient of `CE(f, targets)` with respect to the input of the model's final
/// linear layer, flattened over the batch.
pub fn feature_gradient(model: &Model, batch: &LabeledBatch, targets: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, batch)?;
    let features = fwd
        .features
        .ok_or_else(|| GgdError::contract("model has no classifier layer"))?;
    let loss = tape.cross_entropy_soft(fwd.logits, targets)?;
    Ok(tape.backward(loss)?.wrt(features))
}
