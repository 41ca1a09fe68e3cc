//! Dense `f64` tensors, a reverse-mode tape, neural layers and AdamW.

pub mod check;
mod layers;
mod optim;
mod params;
mod tape;
mod tensor;

pub use layers::{GcnLayer, GraphOperators, LayerNorm, Linear, MultiHeadAttention};
pub use optim::{adam_step, AdamState};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("backward needs a 1x1 loss")]
    NotScalarLoss,
}
