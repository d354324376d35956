use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureSelector, GroupSource, Model, ModelKind, StaticTable};
use crate::diff::Layer;
use crate::error::{GgdError, Result};

fn default_in_channels() -> usize {
    3
}

/// Conv(kernel) + affine + ReLU blocks, global average pooling, then a
/// linear classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleNetSpec {
    pub kernel: usize,
    pub channels: Vec<usize>,
    /// Per-block stride; empty means stride 1 everywhere.
    #[serde(default)]
    pub strides: Vec<usize>,
    #[serde(default = "default_in_channels")]
    pub in_channels: usize,
}

impl SimpleNetSpec {
    pub fn new(kernel: usize, channels: Vec<usize>) -> Self {
        SimpleNetSpec {
            kernel,
            channels,
            strides: Vec::new(),
            in_channels: 3,
        }
    }

    pub fn with_strides(mut self, strides: Vec<usize>) -> Self {
        self.strides = strides;
        self
    }
}

/// SimpleNet family. Kernel 1 yields a [`ModelKind::LowCapacity`] model whose
/// pre-pool units each see exactly one pixel.
pub fn build_simplenet(spec: &SimpleNetSpec, num_classes: usize, seed: u64) -> Result<Model> {
    if spec.channels.is_empty() || spec.channels.contains(&0) {
        return Err(GgdError::contract("SimpleNet needs non-empty positive channels"));
    }
    if !matches!(spec.kernel, 1 | 3) {
        return Err(GgdError::contract(format!(
            "SimpleNet kernel must be 1 or 3, got {}",
            spec.kernel
        )));
    }
    if !spec.strides.is_empty() && spec.strides.len() != spec.channels.len() {
        return Err(GgdError::contract("one stride per channel block is required"));
    }
    if num_classes == 0 {
        return Err(GgdError::contract("num_classes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = spec.in_channels;
    for (i, &ch) in spec.channels.iter().enumerate() {
        let stride = spec.strides.get(i).copied().unwrap_or(1);
        layers.push(Layer::conv2d(prev, ch, spec.kernel, stride, &mut rng)?);
        layers.push(Layer::channel_affine(ch));
        layers.push(Layer::Relu);
        prev = ch;
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::linear(prev, num_classes, &mut rng)?);
    let kind = if spec.kernel == 1 {
        ModelKind::LowCapacity
    } else {
        ModelKind::Base
    };
    Ok(Model::from_parts(
        layers,
        kind,
        vec![spec.in_channels, 0, 0],
        num_classes,
    ))
}

/// 3x3 conv + affine + ReLU blocks whose final maps are flattened straight
/// into a linear classifier, keeping spatial layout. Needs a fixed
/// `(channels, H, W)` sample shape.
pub fn build_conv_classifier(
    sample_shape: &[usize],
    channels: &[usize],
    strides: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<Model> {
    let &[in_ch, mut h, mut w] = sample_shape else {
        return Err(GgdError::contract(format!(
            "conv classifier needs a (channels, H, W) sample, got {sample_shape:?}"
        )));
    };
    if channels.is_empty() || channels.contains(&0) || num_classes == 0 {
        return Err(GgdError::contract(
            "conv classifier needs positive channels and classes",
        ));
    }
    if !strides.is_empty() && strides.len() != channels.len() {
        return Err(GgdError::contract("one stride per channel block is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = in_ch;
    for (i, &ch) in channels.iter().enumerate() {
        let stride = strides.get(i).copied().unwrap_or(1);
        layers.push(Layer::conv2d(prev, ch, 3, stride, &mut rng)?);
        layers.push(Layer::channel_affine(ch));
        layers.push(Layer::Relu);
        h = (h - 1) / stride + 1;
        w = (w - 1) / stride + 1;
        prev = ch;
    }
    layers.push(Layer::linear(prev * h * w, num_classes, &mut rng)?);
    Ok(Model::from_parts(
        layers,
        ModelKind::Base,
        sample_shape.to_vec(),
        num_classes,
    ))
}

fn mlp_layers(inputs: usize, hidden: &[usize], outputs: usize, seed: u64) -> Result<Vec<Layer>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = inputs;
    for &h in hidden {
        layers.push(Layer::linear(prev, h, &mut rng)?);
        layers.push(Layer::Relu);
        prev = h;
    }
    layers.push(Layer::linear(prev, outputs, &mut rng)?);
    Ok(layers)
}

/// Fully connected ReLU network over the flattened sample.
pub fn build_mlp(sample_shape: &[usize], hidden: &[usize], num_classes: usize, seed: u64) -> Result<Model> {
    let inputs: usize = sample_shape.iter().product();
    Ok(Model::from_parts(
        mlp_layers(inputs, hidden, num_classes, seed)?,
        ModelKind::Base,
        sample_shape.to_vec(),
        num_classes,
    ))
}

/// One-hidden-layer network over the per-image mean RGB colour.
pub fn build_background_model(num_classes: usize, hidden: usize, seed: u64) -> Result<Model> {
    Ok(Model::from_parts(
        mlp_layers(3, &[hidden], num_classes, seed)?,
        ModelKind::ExplicitFeature {
            selector: FeatureSelector::MeanColor,
        },
        vec![3],
        num_classes,
    ))
}

/// Network over a fixed column range of flat samples (e.g. the spurious block
/// of synthetic data).
pub fn build_explicit_columns(
    start: usize,
    end: usize,
    hidden: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<Model> {
    if start >= end {
        return Err(GgdError::contract("empty column range"));
    }
    Ok(Model::from_parts(
        mlp_layers(end - start, hidden, num_classes, seed)?,
        ModelKind::ExplicitFeature {
            selector: FeatureSelector::Columns { start, end },
        },
        vec![end - start],
        num_classes,
    ))
}

/// Parameter-free model emitting `log p(y | g)` with additive smoothing
/// `(count(y, g) + eps) / (count(g) + C * eps)`.
pub fn build_static_distribution(
    labels: &[usize],
    bias_attr: &[usize],
    source: GroupSource,
    num_classes: usize,
    epsilon: f64,
) -> Result<Model> {
    if !(epsilon > 0.0) {
        return Err(GgdError::contract("epsilon must be positive"));
    }
    if labels.len() != bias_attr.len() || labels.is_empty() {
        return Err(GgdError::contract("groups must align with non-empty labels"));
    }
    let mut counts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut total = vec![0.0; num_classes];
    for (&y, &b) in labels.iter().zip(bias_attr) {
        if y >= num_classes {
            return Err(GgdError::contract(format!("label {y} outside [0, {num_classes})")));
        }
        counts
            .entry(source.group_of(b))
            .or_insert_with(|| vec![0.0; num_classes])[y] += 1.0;
        total[y] += 1.0;
    }
    let smooth = |row: &[f64]| -> Vec<f64> {
        let denom = row.iter().sum::<f64>() + num_classes as f64 * epsilon;
        row.iter().map(|c| ((c + epsilon) / denom).ln()).collect()
    };
    let table = StaticTable {
        source,
        epsilon,
        groups: counts.iter().map(|(g, row)| (*g, smooth(row))).collect(),
        prior: smooth(&total),
    };
    Ok(Model::from_parts(
        Vec::new(),
        ModelKind::StaticDistribution(table),
        Vec::new(),
        num_classes,
    ))
}

/// Same layers as `base` with freshly initialised parameters.
pub fn clone_architecture(base: &Model, seed: u64) -> Result<Model> {
    if !base.is_trainable() {
        return Err(GgdError::contract("a static distribution has no architecture to clone"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = base
        .layers()
        .iter()
        .map(|layer| match layer {
            Layer::Linear { weight, .. } => Layer::linear(weight.shape()[0], weight.shape()[1], &mut rng),
            Layer::Conv2d { weight, stride, .. } => {
                let s = weight.shape();
                Layer::conv2d(s[1], s[0], s[2], *stride, &mut rng)
            }
            Layer::ChannelAffine { scale, .. } => Ok(Layer::channel_affine(scale.len())),
            Layer::Relu => Ok(Layer::Relu),
            Layer::GlobalAvgPool => Ok(Layer::GlobalAvgPool),
        })
        .collect::<Result<Vec<_>>>()?;
    let of = match base.kind() {
        ModelKind::SelfEnsemble { of } => of.clone(),
        other => Box::new(other.clone()),
    };
    Ok(Model::from_parts(
        layers,
        ModelKind::SelfEnsemble { of },
        base.input_signature().to_vec(),
        base.num_classes(),
    ))
}
