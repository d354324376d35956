//! Pseudo-labels, curriculum schedules, greedy batch steps and training.

mod config;
mod ensemble;
mod optim;
mod pseudo;
mod schedule;
mod train;

pub use config::{DataRefs, ModelSpec, RunConfig, Scheme, SPEC_VERSION};
pub use ensemble::{cr_batch_step, gs_batch_step, EnsembleState, Member, StepLosses};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use pseudo::{
    clip_pseudo, negative_gradient, pseudo_label, record_regularized_loss, reference_prediction, regularized_base_loss,
};
pub use schedule::{lambda_value, Granularity, LambdaKind, LambdaSchedule};
pub use train::{build_models, train, train_from_config, TrainOutcome, DIVERGENCE_LIMIT};
