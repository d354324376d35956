//! The greedy per-batch updates.

use crate::data::LabeledBatch;
use crate::diff::{Tape, Tensor};
use crate::error::{GgdError, Result};
use crate::models::Model;

use super::optim::Optimizer;
use super::pseudo::{pseudo_label, record_regularized_loss, reference_prediction};

/// A biased model and its optimizer.
#[derive(Clone, Debug)]
pub struct Member {
    pub model: Model,
    pub optimizer: Optimizer,
}

/// Ordered biased models plus the accumulated logits `H_0..H_M` of the
/// latest batch.
#[derive(Clone, Debug, Default)]
pub struct EnsembleState {
    members: Vec<Member>,
    accumulated: Vec<Tensor>,
}

/// Loss values of one batch step, plus the base logits before its update.
#[derive(Clone, Debug)]
pub struct StepLosses {
    pub biased: Vec<f64>,
    pub base: f64,
    pub base_logits: Tensor,
}

impl EnsembleState {
    pub fn new(members: Vec<Member>) -> Self {
        EnsembleState {
            members,
            accumulated: Vec::new(),
        }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `H_m` of the most recent batch; `H_0` is zero.
    pub fn accumulated(&self, m: usize) -> Option<&Tensor> {
        self.accumulated.get(m)
    }

    /// `H_M` of the most recent batch.
    pub fn total(&self) -> Option<&Tensor> {
        self.accumulated.last()
    }

    /// Sum of every member's logits on `batch`, without training.
    pub fn ensemble_logits(&self, batch: &LabeledBatch) -> Result<Tensor> {
        let mut h = Tensor::zeros(vec![batch.len(), batch.num_classes()]);
        for member in &self.members {
            h = h.zip_with(&member.model.logits(batch)?, |a, b| a + b)?;
        }
        Ok(h)
    }

    /// Trains each biased model in order on the pseudo-label of the models
    /// before it, and records `H_0..H_M` from their updated logits.
    fn update_biased(&mut self, batch: &LabeledBatch) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(GgdError::contract("empty batch"));
        }
        let y = &batch.onehot;
        let mut h = Tensor::zeros(y.shape().to_vec());
        self.accumulated = vec![h.clone()];
        let mut losses = Vec::with_capacity(self.members.len());
        for member in &mut self.members {
            let target = pseudo_label(&h, y)?;
            let mut tape = Tape::new();
            let fwd = member.model.forward(&mut tape, batch)?;
            let loss = tape.cross_entropy_soft(fwd.logits, &target)?;
            losses.push(tape.value(loss).data()[0]);
            if member.model.is_trainable() {
                let grads = tape.backward(loss)?;
                member.model.store_grads(&grads, &fwd)?;
                member.optimizer.step(&mut member.model)?;
                h = h.zip_with(&member.model.logits(batch)?, |a, b| a + b)?;
            } else {
                h = h.zip_with(tape.value(fwd.logits), |a, b| a + b)?;
            }
            self.accumulated.push(h.clone());
        }
        Ok(losses)
    }
}

enum BaseObjective {
    Pseudo,
    Regularized(f64),
}

fn base_step(
    state: &mut EnsembleState,
    base: &mut Model,
    optimizer: &mut Optimizer,
    batch: &LabeledBatch,
    objective: BaseObjective,
) -> Result<StepLosses> {
    let biased = state.update_biased(batch)?;
    let h = state.total().expect("H_0 is always recorded");
    let y = &batch.onehot;
    let mut tape = Tape::new();
    let fwd = base.forward(&mut tape, batch)?;
    let loss = match objective {
        BaseObjective::Pseudo => tape.cross_entropy_soft(fwd.logits, &pseudo_label(h, y)?)?,
        BaseObjective::Regularized(lambda) => {
            let sigma_hat = reference_prediction(h, y)?;
            record_regularized_loss(&mut tape, fwd.logits, y, &sigma_hat, lambda)?
        }
    };
    let grads = tape.backward(loss)?;
    base.store_grads(&grads, &fwd)?;
    optimizer.step(base)?;
    Ok(StepLosses {
        biased,
        base: tape.value(loss).data()[0],
        base_logits: tape.value(fwd.logits).clone(),
    })
}

/// Gradient supervision: the base model fits the ensemble's clipped
/// negative gradient.
pub fn gs_batch_step(
    state: &mut EnsembleState,
    base: &mut Model,
    batch: &LabeledBatch,
    optimizer: &mut Optimizer,
) -> Result<StepLosses> {
    base_step(state, base, optimizer, batch, BaseObjective::Pseudo)
}

/// Curriculum regularization: the base model minimizes
/// `CE(f, Y) - lambda_t * CE(f, Y ⊙ softmax(H_M))`.
pub fn cr_batch_step(
    state: &mut EnsembleState,
    base: &mut Model,
    batch: &LabeledBatch,
    lambda_t: f64,
    optimizer: &mut Optimizer,
) -> Result<StepLosses> {
    base_step(state, base, optimizer, batch, BaseObjective::Regularized(lambda_t))
}
