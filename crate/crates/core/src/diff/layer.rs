use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Tape, Tensor, Var};
use crate::error::{GgdError, Result};

/// Discriminant of a [`Layer`], used in checkpoints and structural comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Linear,
    Relu,
    Conv2d,
    /// Learnable per-channel `x * scale + shift`; stands in for batch norm.
    ChannelAffine,
    GlobalAvgPool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Linear {
        weight: Tensor,
        bias: Tensor,
    },
    Relu,
    Conv2d {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
    },
    ChannelAffine {
        scale: Tensor,
        shift: Tensor,
    },
    GlobalAvgPool,
}

fn glorot(rng: &mut impl Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape and data built together")
}

impl Layer {
    pub fn linear(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(GgdError::contract("linear layer needs positive sizes"));
        }
        Ok(Layer::Linear {
            weight: glorot(rng, vec![inputs, outputs], inputs, outputs),
            bias: Tensor::zeros(vec![outputs]),
        })
    }

    /// Square "same"-padded convolution; `kernel` must be 1 or 3.
    pub fn conv2d(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, rng: &mut impl Rng) -> Result<Self> {
        if !matches!(kernel, 1 | 3) {
            return Err(GgdError::contract(format!("conv kernel must be 1 or 3, got {kernel}")));
        }
        if in_ch == 0 || out_ch == 0 || stride == 0 {
            return Err(GgdError::contract("conv channels and stride must be positive"));
        }
        let area = kernel * kernel;
        Ok(Layer::Conv2d {
            weight: glorot(rng, vec![out_ch, in_ch, kernel, kernel], in_ch * area, out_ch * area),
            bias: Tensor::zeros(vec![out_ch]),
            stride,
        })
    }

    pub fn channel_affine(channels: usize) -> Self {
        Layer::ChannelAffine {
            scale: Tensor::full(vec![channels], 1.0),
            shift: Tensor::zeros(vec![channels]),
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Linear { .. } => LayerKind::Linear,
            Layer::Relu => LayerKind::Relu,
            Layer::Conv2d { .. } => LayerKind::Conv2d,
            Layer::ChannelAffine { .. } => LayerKind::ChannelAffine,
            Layer::GlobalAvgPool => LayerKind::GlobalAvgPool,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Linear { weight, bias } | Layer::Conv2d { weight, bias, .. } => {
                vec![weight, bias]
            }
            Layer::ChannelAffine { scale, shift } => vec![scale, shift],
            Layer::Relu | Layer::GlobalAvgPool => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Linear { weight, bias } | Layer::Conv2d { weight, bias, .. } => {
                vec![weight, bias]
            }
            Layer::ChannelAffine { scale, shift } => vec![scale, shift],
            Layer::Relu | Layer::GlobalAvgPool => Vec::new(),
        }
    }

    /// Records this layer on `tape`. Returns the output and the parameter
    /// leaves in [`Layer::params`] order.
    pub fn apply(&self, tape: &mut Tape, input: Var) -> Result<(Var, Vec<Var>)> {
        match self {
            Layer::Linear { weight, bias } => {
                let (w, b) = (tape.leaf(weight.clone()), tape.leaf(bias.clone()));
                Ok((tape.linear(input, w, b)?, vec![w, b]))
            }
            Layer::Relu => Ok((tape.relu(input), Vec::new())),
            Layer::Conv2d { weight, bias, stride } => {
                let (w, b) = (tape.leaf(weight.clone()), tape.leaf(bias.clone()));
                Ok((tape.conv2d(input, w, b, *stride)?, vec![w, b]))
            }
            Layer::ChannelAffine { scale, shift } => {
                let (s, t) = (tape.leaf(scale.clone()), tape.leaf(shift.clone()));
                Ok((tape.channel_affine(input, s, t)?, vec![s, t]))
            }
            Layer::GlobalAvgPool => Ok((tape.global_avg_pool(input)?, Vec::new())),
        }
    }
}

/// Applies `layer` to a concrete input on `tape` and returns the output value.
pub fn apply_layer(layer: &Layer, input: &Tensor, tape: &mut Tape) -> Result<Tensor> {
    let x = tape.leaf(input.clone());
    let (y, _) = layer.apply(tape, x)?;
    Ok(tape.value(y).clone())
}
