//! From-scratch recurrent sequence classifier: LSTM and RNN cells, the full
//! embedder + stacked-LSTM + head model with exact backpropagation through
//! time, softmax cross-entropy, Adam, and a versioned checkpoint format.
//!
//! Everything runs in double precision on plain `Vec<f64>` storage; there is
//! no framework underneath, which is what makes the bit-reproducibility
//! guarantees of the training harness possible.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod lstm;
pub mod model;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use loss::{argmax, cross_entropy, softmax};
pub use lstm::{lstm_cell, rnn_cell, LayerState, LstmLayerParams, LstmParams, LstmState};
pub use model::{Affine, ForwardCache, Model, ModelParams, ModelSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnError {
    #[error("shape mismatch in {what}")]
    ShapeMismatch { what: &'static str },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("sequence must contain at least one timestep")]
    EmptySequence,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("cache does not match this model's architecture")]
    StaleCache,
    #[error("invalid model spec: {reason}")]
    InvalidSpec { reason: String },
}
