//! Softmax and soft-target cross-entropy evaluated outside the tape.

use super::Tensor;
use crate::error::{GgdError, Result};

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(GgdError::Numeric(format!("{what} contains non-finite values")))
    }
}

fn last_axis(t: &Tensor) -> usize {
    *t.shape().last().expect("tensors have at least one axis")
}

/// Row softmax with max-subtraction, written into `out`.
pub(crate) fn softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `log softmax(z)` of one row.
pub(crate) fn log_softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    for (o, &v) in out.iter_mut().zip(z) {
        *o = v - lse;
    }
}

/// Softmax over the last axis.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    check_finite(logits, "softmax input")?;
    let c = last_axis(logits);
    let mut out = vec![0.0; logits.len()];
    for (z, o) in logits.data().chunks(c).zip(out.chunks_mut(c)) {
        softmax_row(z, o);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

pub(crate) fn check_targets(logits: &Tensor, targets: &Tensor) -> Result<()> {
    if logits.shape() != targets.shape() {
        return Err(GgdError::dim(
            "cross_entropy_soft",
            format!("logits {:?} and targets {:?} differ", logits.shape(), targets.shape()),
        ));
    }
    if let Some(w) = targets.data().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(GgdError::contract(format!(
            "target weights must be finite and non-negative, found {w}"
        )));
    }
    Ok(())
}

/// Per-row `-sum_j w_j log softmax_j(z)`.
pub fn cross_entropy_per_sample(logits: &Tensor, targets: &Tensor) -> Result<Vec<f64>> {
    check_targets(logits, targets)?;
    check_finite(logits, "cross-entropy logits")?;
    let c = last_axis(logits);
    let mut logp = vec![0.0; c];
    Ok(logits
        .data()
        .chunks(c)
        .zip(targets.data().chunks(c))
        .map(|(z, w)| {
            log_softmax_row(z, &mut logp);
            -w.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect())
}

/// Soft-target cross-entropy averaged over all leading axes. Target rows may
/// be sub-stochastic.
pub fn cross_entropy_soft(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    let per = cross_entropy_per_sample(logits, targets)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}
