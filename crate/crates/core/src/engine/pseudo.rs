//! Pseudo-labels, reference predictions and the regularized base loss.

use crate::diff::{cross_entropy_soft, softmax, Tape, Tensor, Var};
use crate::error::{GgdError, Result};

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() || a.shape().len() != 2 {
        return Err(GgdError::dim(
            op,
            format!("{:?} vs {:?}, expected matching (batch, C)", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// `Y - softmax(H)` rowwise: the negative gradient of CE at the ensemble logits.
pub fn negative_gradient(h: &Tensor, y: &Tensor) -> Result<Tensor> {
    same_shape("negative_gradient", h, y)?;
    y.zip_with(&softmax(h)?, |yj, sj| yj - sj)
}

/// Keeps `raw` only where `Y > 0`, floored at 0.
pub fn clip_pseudo(raw: &Tensor, y: &Tensor) -> Result<Tensor> {
    same_shape("clip_pseudo", raw, y)?;
    raw.zip_with(y, |r, yj| if yj > 0.0 { r.max(0.0) } else { 0.0 })
}

/// Pseudo-label of a whole ensemble: `clip_pseudo(negative_gradient(H, Y), Y)`.
pub fn pseudo_label(h: &Tensor, y: &Tensor) -> Result<Tensor> {
    clip_pseudo(&negative_gradient(h, y)?, y)
}

/// `Y ⊙ softmax(H)`.
pub fn reference_prediction(h: &Tensor, y: &Tensor) -> Result<Tensor> {
    same_shape("reference_prediction", h, y)?;
    y.zip_with(&softmax(h)?, |yj, sj| yj * sj)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GgdError::contract(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// `CE(f, Y) - lambda * CE(f, sigma_hat)`.
pub fn regularized_base_loss(f: &Tensor, y: &Tensor, sigma_hat: &Tensor, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(cross_entropy_soft(f, y)? - lambda * cross_entropy_soft(f, sigma_hat)?)
}

/// Records [`regularized_base_loss`] on a tape.
pub fn record_regularized_loss(
    tape: &mut Tape,
    logits: Var,
    y: &Tensor,
    sigma_hat: &Tensor,
    lambda: f64,
) -> Result<Var> {
    check_lambda(lambda)?;
    let plain = tape.cross_entropy_soft(logits, y)?;
    if lambda == 0.0 {
        return Ok(plain);
    }
    let agree = tape.cross_entropy_soft(logits, sigma_hat)?;
    let agree = tape.scale(agree, -lambda);
    tape.add(plain, agree)
}
