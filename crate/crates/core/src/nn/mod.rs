//! Hand-written neural network layers with analytic gradients.
//!
//! Every layer exposes a forward pass, a backward pass over the values cached
//! by (or recomputable from) the forward pass, and holds its parameters in
//! plain `Vec`s so optimizers and serializers can walk them directly. There is
//! no autodiff graph: models chain the backward calls explicitly.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod gru;
pub mod init;
mod linear;
mod loss;
mod tensor;

pub use activation::{relu_backward, relu_forward, relu_inplace, sigmoid, sigmoid_inplace};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::{BatchNorm, BnCache, BnGrad, BnMode};
pub use conv::{Conv1d, Conv1dGrad, ConvSpec};
pub use gru::{Gru, GruCache, GruGrad, GruLayer, GruLayerGrad, GruSpec};
pub use linear::{Linear, LinearGrad};
pub use loss::bce_with_logits;
pub use tensor::Tensor2D;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("invalid argument to {op}: {reason}")]
    Argument { op: &'static str, reason: String },
}

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, found: impl ToString) -> NnError {
    NnError::Shape {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
