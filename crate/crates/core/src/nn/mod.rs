//! Minimal self-contained neural-network stack: reverse-mode automatic
//! differentiation over dense real tensors, the transformer layers used by
//! the inference models, and the AdamW optimizer.
//!
//! Training runs in `f32` for throughput; gradient checks and tests use
//! the same code paths at `f64`.

mod gradcheck;
mod io;
mod layers;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use io::{load_params, save_params, ModelFile};
pub use layers::{
    smooth_binary_targets, smooth_onehot, DecoderLayer, EmbedMlp, EncoderLayer, LayerNorm,
    Linear, Mha, ParamId, ParamSet,
};
pub use optim::AdamW;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite gradient in parameter {0}; step rejected")]
    NonFiniteGradient(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("architecture mismatch: stored {stored}, runtime {runtime}")]
    ArchMismatch { stored: String, runtime: String },
}
