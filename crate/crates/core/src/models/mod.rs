//! Base and biased model construction.

mod builders;
mod checkpoint;

pub use builders::{
    build_background_model, build_conv_classifier, build_explicit_columns, build_mlp, build_simplenet,
    build_static_distribution, clone_architecture, SimpleNetSpec,
};
pub use checkpoint::{load_model, model_from_bytes, model_to_bytes, save_model};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledBatch;
use crate::diff::{Gradients, Layer, Tape, Tensor, Var};
use crate::error::{GgdError, Result};

/// Which slice of a sample an explicit-feature model looks at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "selector")]
pub enum FeatureSelector {
    /// Per-channel mean of the image, `(batch, channels)`.
    MeanColor,
    /// Columns `start..end` of the flattened sample.
    Columns { start: usize, end: usize },
}

impl FeatureSelector {
    pub fn select(&self, features: &Tensor) -> Result<Tensor> {
        let n = features.rows();
        match self {
            FeatureSelector::MeanColor => {
                let shape = features.shape();
                if shape.len() != 4 {
                    return Err(GgdError::dim(
                        "MeanColor",
                        format!("expected (batch, channels, height, width), got {shape:?}"),
                    ));
                }
                let (ch, area) = (shape[1], shape[2] * shape[3]);
                let means = features
                    .data()
                    .chunks(area)
                    .map(|p| p.iter().sum::<f64>() / area as f64)
                    .collect();
                Tensor::new(vec![n, ch], means)
            }
            &FeatureSelector::Columns { start, end } => {
                let width = features.row_len();
                if start >= end || end > width {
                    return Err(GgdError::dim(
                        "Columns",
                        format!("columns {start}..{end} outside sample width {width}"),
                    ));
                }
                let mut out = Vec::with_capacity(n * (end - start));
                for i in 0..n {
                    out.extend_from_slice(&features.row(i)[start..end]);
                }
                Tensor::new(vec![n, end - start], out)
            }
        }
    }
}

/// Where a static distribution model reads each sample's group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSource {
    /// The sample's bias attribute.
    BiasAttr,
    /// Every sample shares one group, so the table is the class prior.
    Global,
}

impl GroupSource {
    pub fn group_of(&self, bias_attr: usize) -> usize {
        match self {
            GroupSource::BiasAttr => bias_attr,
            GroupSource::Global => 0,
        }
    }
}

/// Smoothed `log p(y | g)` rows with a global-prior fallback.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticTable {
    pub source: GroupSource,
    pub epsilon: f64,
    pub groups: BTreeMap<usize, Vec<f64>>,
    pub prior: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    Base,
    /// Small receptive field network that can only see local texture.
    LowCapacity,
    ExplicitFeature {
        selector: FeatureSelector,
    },
    /// Fresh copy of another model's architecture.
    SelfEnsemble {
        of: Box<ModelKind>,
    },
    StaticDistribution(StaticTable),
}

impl ModelKind {
    /// Feature selector in effect, looking through self-ensemble clones.
    pub fn selector(&self) -> Option<&FeatureSelector> {
        match self {
            ModelKind::ExplicitFeature { selector } => Some(selector),
            ModelKind::SelfEnsemble { of } => of.selector(),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Base => "base",
            ModelKind::LowCapacity => "low_capacity",
            ModelKind::ExplicitFeature { .. } => "explicit_feature",
            ModelKind::SelfEnsemble { .. } => "self_ensemble",
            ModelKind::StaticDistribution(_) => "static_distribution",
        }
    }
}

/// Result of recording a model on a tape.
#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: Var,
    /// Input of the final linear layer, when the model has one.
    pub features: Option<Var>,
    /// Parameter leaves in [`Model::params`] order.
    pub params: Vec<Var>,
}

/// A differentiable map from a batch to `(batch, C)` logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
    kind: ModelKind,
    /// Expected per-sample input shape after feature selection; 0 = any size.
    input_signature: Vec<usize>,
    num_classes: usize,
}

impl Model {
    pub(crate) fn from_parts(
        layers: Vec<Layer>,
        kind: ModelKind,
        input_signature: Vec<usize>,
        num_classes: usize,
    ) -> Self {
        Model {
            layers,
            kind,
            input_signature,
            num_classes,
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn set_kind(&mut self, kind: ModelKind) {
        self.kind = kind;
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_signature(&self) -> &[usize] {
        &self.input_signature
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self.kind, ModelKind::StaticDistribution(_))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Applies the kind's feature selector to a batch.
    pub fn select_input(&self, batch: &LabeledBatch) -> Result<Tensor> {
        let input = match self.kind.selector() {
            Some(selector) => selector.select(&batch.features)?,
            None => batch.features.clone(),
        };
        let got = &input.shape()[1..];
        let want = &self.input_signature;
        let matches = got.len() == want.len() && got.iter().zip(want).all(|(g, w)| *w == 0 || g == w);
        if !matches {
            return Err(GgdError::dim(
                "model input",
                format!("sample shape {got:?} does not match signature {want:?}"),
            ));
        }
        Ok(input)
    }

    fn static_logits(&self, table: &StaticTable, batch: &LabeledBatch) -> Result<Tensor> {
        let mut out = Vec::with_capacity(batch.len() * self.num_classes);
        for &b in &batch.bias_attr {
            let g = table.source.group_of(b);
            match table.groups.get(&g) {
                Some(row) => out.extend_from_slice(row),
                None => {
                    log::warn!("group {g} unseen when fitting the static distribution; using the label prior");
                    out.extend_from_slice(&table.prior);
                }
            }
        }
        Tensor::new(vec![batch.len(), self.num_classes], out)
    }

    pub fn forward(&self, tape: &mut Tape, batch: &LabeledBatch) -> Result<Forward> {
        if let ModelKind::StaticDistribution(table) = &self.kind {
            let logits = tape.constant(self.static_logits(table, batch)?);
            return Ok(Forward {
                logits,
                features: None,
                params: Vec::new(),
            });
        }
        let mut x = tape.constant(self.select_input(batch)?);
        let mut params = Vec::new();
        let mut features = None;
        for layer in &self.layers {
            if matches!(layer, Layer::Linear { .. }) {
                features = Some(x);
            }
            let (y, p) = layer.apply(tape, x)?;
            params.extend(p);
            x = y;
        }
        Ok(Forward {
            logits: x,
            features,
            params,
        })
    }

    /// Logits for a batch without keeping the tape.
    pub fn logits(&self, batch: &LabeledBatch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, batch)?;
        Ok(tape.value(fwd.logits).clone())
    }

    pub fn predict(&self, batch: &LabeledBatch) -> Result<Vec<usize>> {
        Ok(self.logits(batch)?.argmax_rows())
    }

    /// Copies the parameter gradients of `fwd` into each parameter's grad buffer.
    pub fn store_grads(&mut self, grads: &Gradients, fwd: &Forward) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != fwd.params.len() {
            return Err(GgdError::contract("forward record does not belong to this model"));
        }
        for (p, &v) in params.iter_mut().zip(&fwd.params) {
            p.set_grad(grads.wrt(v))?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
