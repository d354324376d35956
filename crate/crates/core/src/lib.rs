//! Greedy de-bias training.
//!
//! A base classifier is trained alongside an ordered ensemble of biased
//! models. Each biased model fits the clipped negative gradient left by the
//! models before it; the base model then either fits the residual pseudo-label
//! of the whole ensemble (gradient supervision) or plain cross-entropy minus a
//! curriculum-weighted agreement term (curriculum regularization).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diff;
pub mod engine;
pub mod error;
pub mod eval;
pub mod models;
pub mod seed;

pub use error::{GgdError, Result};
