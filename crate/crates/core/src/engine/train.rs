//! The outer training loop.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::config::{RunConfig, Scheme};
use super::ensemble::{cr_batch_step, gs_batch_step, EnsembleState, Member, StepLosses};
use super::optim::Optimizer;
use super::schedule::{lambda_value, Granularity};
use crate::data::{load_dataset, BiasedDataset};
use crate::diff::cross_entropy_per_sample;
use crate::error::{GgdError, Result};
use crate::eval::{evaluate_grid, hard_mask, MetricLog};
use crate::models::Model;
use crate::seed::{mix, stream_rng, SubSeeds};

/// Losses above this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

pub struct TrainOutcome {
    /// The only model used at test time.
    pub base: Model,
    pub ensemble: EnsembleState,
    pub log: MetricLog,
    /// `lambda_t` used at every optimizer step (curriculum runs only).
    pub lambdas: Vec<f64>,
}

/// Freshly initialised base model and biased ensemble for `config`.
pub fn build_models(config: &RunConfig, train: &BiasedDataset) -> Result<(Model, EnsembleState)> {
    let init = SubSeeds::from_root(config.seed).init;
    let base = config.base.build(train, None, mix(init, 0))?;
    let members = config
        .biased
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            Ok(Member {
                model: spec.build(train, Some(&base), mix(init, m as u64 + 1))?,
                optimizer: Optimizer::new(config.optimizer),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((base, EnsembleState::new(members)))
}

fn check_loss(epoch: usize, step: usize, model: String, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
        return Err(GgdError::Divergence {
            epoch,
            step,
            model,
            loss,
        });
    }
    Ok(())
}

fn ratio(hard: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        hard / total
    }
}

/// Trains `config` on `train`, evaluating the base model on every dataset in
/// `evals` at epoch ends.
pub fn train(
    config: &RunConfig,
    train: &BiasedDataset,
    evals: &BTreeMap<String, BiasedDataset>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let (mut base, mut ensemble) = build_models(config, train)?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let shuffle = SubSeeds::from_root(config.seed).shuffle;
    let n = train.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let horizon = match config.lambda.granularity {
        Granularity::Epoch => config.epochs,
        Granularity::Batch => config.epochs * steps_per_epoch,
    };
    let hard = hard_mask(&train.labels, &train.bias_attr);
    let mut log = MetricLog::new(config.seed);
    let mut lambdas = Vec::new();
    let mut iteration = 0;
    let (mut window_hard, mut window_total) = (0.0, 0.0);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(shuffle, epoch as u64));
        let (mut epoch_hard, mut epoch_total) = (0.0, 0.0);
        let mut correct = 0usize;
        let mut base_loss = 0.0;
        let mut biased_loss = vec![0.0; ensemble.len()];
        let mut lambda_t = 0.0;

        for chunk in order.chunks(config.batch_size) {
            iteration += 1;
            let batch = train.batch(chunk)?;
            let step = match config.scheme {
                Scheme::Gs => gs_batch_step(&mut ensemble, &mut base, &batch, &mut optimizer),
                Scheme::Cr => {
                    lambda_t = match config.lambda.granularity {
                        Granularity::Epoch => lambda_value(&config.lambda, epoch, horizon)?,
                        Granularity::Batch => lambda_value(&config.lambda, iteration - 1, horizon)?,
                    };
                    lambdas.push(lambda_t);
                    cr_batch_step(&mut ensemble, &mut base, &batch, lambda_t, &mut optimizer)
                }
            };
            let StepLosses {
                biased,
                base: loss,
                base_logits,
            } = step.map_err(|e| match e {
                GgdError::Numeric(msg) => GgdError::Divergence {
                    epoch,
                    step: iteration,
                    model: msg,
                    loss: f64::NAN,
                },
                other => other,
            })?;
            check_loss(epoch, iteration, "base".into(), loss)?;
            for (m, l) in biased.iter().enumerate() {
                check_loss(epoch, iteration, format!("biased[{m}]"), *l)?;
                biased_loss[m] += l * chunk.len() as f64;
            }
            base_loss += loss * chunk.len() as f64;

            let per_sample = cross_entropy_per_sample(&base_logits, &batch.onehot)?;
            for (&i, l) in chunk.iter().zip(&per_sample) {
                if hard[i] {
                    epoch_hard += l;
                    window_hard += l;
                }
                epoch_total += l;
                window_total += l;
            }
            let pred = base_logits.argmax_rows();
            correct += pred.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
            if iteration % config.hard_ratio_window == 0 {
                log.scalar_at(
                    epoch,
                    iteration,
                    "train",
                    "hard_ratio_window",
                    ratio(window_hard, window_total),
                );
                (window_hard, window_total) = (0.0, 0.0);
            }
        }

        let nf = n as f64;
        log.scalar(epoch, "train", "accuracy", correct as f64 / nf);
        log.scalar(epoch, "train", "base_loss", base_loss / nf);
        for (m, l) in biased_loss.iter().enumerate() {
            log.scalar(epoch, "train", &format!("biased_loss_{m}"), l / nf);
        }
        log.scalar(epoch, "train", "hard_ratio", ratio(epoch_hard, epoch_total));
        if config.scheme == Scheme::Cr {
            log.scalar(epoch, "train", "lambda", lambda_t);
        }
        if (epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs {
            let grid = evaluate_grid(&base, evals, epoch, &mut log)?;
            log::info!("{} seed {} epoch {}: {:?}", config.name, config.seed, epoch, grid);
        }
    }
    Ok(TrainOutcome {
        base,
        ensemble,
        log,
        lambdas,
    })
}

/// Loads the datasets named in `config.data` and trains.
pub fn train_from_config(config: &RunConfig) -> Result<TrainOutcome> {
    let refs = config
        .data
        .as_ref()
        .ok_or_else(|| GgdError::Config("config has no data section".into()))?;
    let train_set = load_dataset(&refs.train)?;
    let evals = refs
        .eval
        .iter()
        .map(|(name, path)| Ok((name.clone(), load_dataset(path)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    train(config, &train_set, &evals)
}
