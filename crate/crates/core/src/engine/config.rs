//! Declarative run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::optim::OptimizerConfig;
use super::schedule::LambdaSchedule;
use crate::data::BiasedDataset;
use crate::error::{GgdError, Result};
use crate::models::{
    build_background_model, build_conv_classifier, build_explicit_columns, build_mlp, build_simplenet,
    build_static_distribution, clone_architecture, GroupSource, Model, SimpleNetSpec,
};

pub const SPEC_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Gradient supervision.
    Gs,
    /// Curriculum regularization.
    Cr,
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ModelSpec {
    Simplenet {
        kernel: usize,
        channels: Vec<usize>,
        #[serde(default)]
        strides: Vec<usize>,
    },
    /// 3x3 conv blocks flattened into a linear classifier.
    Cnn {
        channels: Vec<usize>,
        #[serde(default)]
        strides: Vec<usize>,
    },
    Mlp {
        #[serde(default)]
        hidden: Vec<usize>,
    },
    /// MLP over the mean image colour.
    Background { hidden: usize },
    /// MLP over columns `start..end` of the flat sample.
    Columns {
        start: usize,
        end: usize,
        #[serde(default)]
        hidden: Vec<usize>,
    },
    /// Smoothed group-conditioned label prior fitted on the training set.
    StaticDistribution {
        source: GroupSource,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// Fresh copy of the base architecture.
    SelfEnsemble,
}

impl ModelSpec {
    /// Builds the model for data shaped like `train`. `base` is required for
    /// self-ensemble clones.
    pub fn build(&self, train: &BiasedDataset, base: Option<&Model>, seed: u64) -> Result<Model> {
        let c = train.num_classes;
        let shape = train.sample_shape();
        match self {
            ModelSpec::Simplenet {
                kernel,
                channels,
                strides,
            } => {
                let spec = SimpleNetSpec {
                    kernel: *kernel,
                    channels: channels.clone(),
                    strides: strides.clone(),
                    in_channels: shape[0],
                };
                build_simplenet(&spec, c, seed)
            }
            ModelSpec::Cnn { channels, strides } => build_conv_classifier(shape, channels, strides, c, seed),
            ModelSpec::Mlp { hidden } => build_mlp(shape, hidden, c, seed),
            ModelSpec::Background { hidden } => build_background_model(c, *hidden, seed),
            ModelSpec::Columns { start, end, hidden } => build_explicit_columns(*start, *end, hidden, c, seed),
            ModelSpec::StaticDistribution { source, epsilon } => {
                build_static_distribution(&train.labels, &train.bias_attr, *source, c, *epsilon)
            }
            ModelSpec::SelfEnsemble => {
                let base = base.ok_or_else(|| GgdError::Config("self_ensemble needs a base model to clone".into()))?;
                clone_architecture(base, seed)
            }
        }
    }
}

/// Dataset files: one training set and named evaluation sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRefs {
    pub train: PathBuf,
    #[serde(default)]
    pub eval: BTreeMap<String, PathBuf>,
}

fn default_batch() -> usize {
    256
}

fn default_window() -> usize {
    100
}

fn default_eval_every() -> usize {
    1
}

fn default_lambda() -> LambdaSchedule {
    LambdaSchedule::constant(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: u32,
    /// Method label used in reports.
    pub name: String,
    #[serde(default)]
    pub data: Option<DataRefs>,
    pub base: ModelSpec,
    /// Biased models in greedy order.
    #[serde(default)]
    pub biased: Vec<ModelSpec>,
    pub scheme: Scheme,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaSchedule,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Iterations per windowed hard-ratio record.
    #[serde(default = "default_window")]
    pub hard_ratio_window: usize,
    /// Evaluate every this many epochs; the last epoch is always evaluated.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl RunConfig {
    pub fn new(name: &str, base: ModelSpec, biased: Vec<ModelSpec>, scheme: Scheme, epochs: usize, seed: u64) -> Self {
        RunConfig {
            spec_version: SPEC_VERSION,
            name: name.into(),
            data: None,
            base,
            biased,
            scheme,
            lambda: default_lambda(),
            optimizer: OptimizerConfig::default(),
            batch_size: default_batch(),
            epochs,
            seed,
            hard_ratio_window: default_window(),
            eval_every: default_eval_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(GgdError::Config(format!(
                "spec_version {} is not supported (expected {SPEC_VERSION})",
                self.spec_version
            )));
        }
        if self.epochs == 0 {
            return Err(GgdError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GgdError::Config("batch_size must be at least 1".into()));
        }
        if self.hard_ratio_window == 0 || self.eval_every == 0 {
            return Err(GgdError::Config(
                "hard_ratio_window and eval_every must be positive".into(),
            ));
        }
        if matches!(
            self.base,
            ModelSpec::StaticDistribution { .. } | ModelSpec::SelfEnsemble
        ) {
            return Err(GgdError::Config("the base model must be trainable".into()));
        }
        self.optimizer.validate()?;
        self.lambda.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| GgdError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text).map_err(|e| match e {
            GgdError::Config(msg) => GgdError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
