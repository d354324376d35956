//! Central-difference gradient checking for whole models.

use crate::data::LabeledBatch;
use crate::diff::{Tape, Tensor, Var};
use crate::engine::record_regularized_loss;
use crate::error::{GgdError, Result};
use crate::models::Model;

/// Loss placed on top of a model's logits.
#[derive(Clone, Debug)]
pub enum LossSpec {
    SoftCrossEntropy(Tensor),
    SquaredError(Tensor),
    /// `CE(f, Y) - lambda * CE(f, sigma_hat)` with `Y` taken from the batch.
    Regularized {
        sigma_hat: Tensor,
        lambda: f64,
    },
}

fn record(model: &Model, batch: &LabeledBatch, loss: &LossSpec, tape: &mut Tape) -> Result<(Var, Vec<Var>)> {
    let fwd = model.forward(tape, batch)?;
    let out = match loss {
        LossSpec::SoftCrossEntropy(t) => tape.cross_entropy_soft(fwd.logits, t)?,
        LossSpec::SquaredError(t) => tape.squared_error(fwd.logits, t)?,
        LossSpec::Regularized { sigma_hat, lambda } => {
            record_regularized_loss(tape, fwd.logits, &batch.onehot, sigma_hat, *lambda)?
        }
    };
    Ok((out, fwd.params))
}

pub fn loss_value(model: &Model, batch: &LabeledBatch, loss: &LossSpec) -> Result<f64> {
    let mut tape = Tape::new();
    let (out, _) = record(model, batch, loss, &mut tape)?;
    Ok(tape.value(out).data()[0])
}

/// Backward-pass gradient flattened over [`Model::params`].
pub fn analytic_gradient(model: &Model, batch: &LabeledBatch, loss: &LossSpec) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let (out, params) = record(model, batch, loss, &mut tape)?;
    let grads = tape.backward(out)?;
    Ok(params.into_iter().flat_map(|p| grads.wrt(p)).collect())
}

fn entry_mut(model: &mut Model, mut index: usize) -> &mut f64 {
    for p in model.params_mut() {
        if index < p.len() {
            return &mut p.data_mut()[index];
        }
        index -= p.len();
    }
    panic!("parameter index out of range");
}

/// Central differences `(L(p + h) - L(p - h)) / 2h` at the given flat entries.
pub fn numeric_gradient(
    model: &Model,
    batch: &LabeledBatch,
    loss: &LossSpec,
    step: f64,
    entries: &[usize],
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(GgdError::contract("finite-difference step must be positive"));
    }
    let total = model.num_params();
    let mut probe = model.clone();
    entries
        .iter()
        .map(|&i| {
            if i >= total {
                return Err(GgdError::contract(format!("entry {i} beyond {total} parameters")));
            }
            let orig = *entry_mut(&mut probe, i);
            *entry_mut(&mut probe, i) = orig + step;
            let up = loss_value(&probe, batch, loss)?;
            *entry_mut(&mut probe, i) = orig - step;
            let down = loss_value(&probe, batch, loss)?;
            *entry_mut(&mut probe, i) = orig;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// `max |a - n| / max(1, |a|, |n|)`.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / 1f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

/// Evenly spaced entries covering at most `max_entries` of `total`.
pub fn sample_entries(total: usize, max_entries: usize) -> Vec<usize> {
    if total <= max_entries {
        return (0..total).collect();
    }
    (0..max_entries).map(|k| k * total / max_entries).collect()
}

/// Max relative error between backward and central-difference gradients.
/// Models with more than `max_entries` parameters are checked on an evenly
/// spaced subset.
pub fn finite_diff_check(
    model: &Model,
    batch: &LabeledBatch,
    step: f64,
    loss: &LossSpec,
    max_entries: usize,
) -> Result<f64> {
    let total = model.num_params();
    if total == 0 {
        return Err(GgdError::contract("model has no parameters to check"));
    }
    let entries = sample_entries(total, max_entries.max(1));
    let analytic = analytic_gradient(model, batch, loss)?;
    let picked: Vec<f64> = entries.iter().map(|&i| analytic[i]).collect();
    let numeric = numeric_gradient(model, batch, loss, step, &entries)?;
    Ok(compare_gradients(&picked, &numeric))
}
