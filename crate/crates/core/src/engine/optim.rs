use serde::{Deserialize, Serialize};

use crate::error::{GgdError, Result};
use crate::models::Model;

fn default_lr() -> f64 {
    1e-3
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// One optimizer setting shared by the base and every trainable biased model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default)]
    pub kind: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            lr,
            ..Default::default()
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(GgdError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(GgdError::Config(
                "adam betas must lie in [0, 1) and eps be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-model optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies and clears the gradients stored in `model`'s parameters.
    /// Static distribution models are left untouched.
    pub fn step(&mut self, model: &mut Model) -> Result<()> {
        if !model.is_trainable() {
            return Ok(());
        }
        self.steps += 1;
        let c = self.config;
        let mut params = model.params_mut();
        if c.kind == OptimizerKind::Adam && self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        let bias1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bias2 = 1.0 - c.beta2.powi(self.steps as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(grad) = p.take_grad() else {
                return Err(GgdError::contract("optimizer step without stored gradients"));
            };
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in p.data_mut().iter_mut().zip(&grad) {
                        *w -= c.lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    for (((w, g), mj), vj) in p.data_mut().iter_mut().zip(&grad).zip(m).zip(v) {
                        *mj = c.beta1 * *mj + (1.0 - c.beta1) * g;
                        *vj = c.beta2 * *vj + (1.0 - c.beta2) * g * g;
                        *w -= c.lr * (*mj / bias1) / ((*vj / bias2).sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
