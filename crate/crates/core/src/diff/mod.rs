//! Dense tensors, the layer set, reverse-mode gradients and gradient checking.

mod gradcheck;
mod kernels;
mod layer;
mod ops;
mod tape;
mod tensor;

pub use gradcheck::{
    analytic_gradient, compare_gradients, finite_diff_check, loss_value, numeric_gradient, sample_entries, LossSpec,
};
pub use layer::{apply_layer, Layer, LayerKind};
pub use ops::{cross_entropy_per_sample, cross_entropy_soft, softmax};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
