//! Sequence-training toolkit built around a stepped sub-batch sampler.
//!
//! The stepped sampler slides a window of `step_size` items across each
//! batch with a configurable stride, so consecutive sub-batches overlap and
//! the model sees the shared items again. The crate bundles everything needed
//! to study that sampler end to end on a CPU:
//!
//! * [`sampler`]: window planning, sub-batch extraction, the inverse
//!   (restore) operation, and a streaming iterator over a whole dataset.
//! * [`tinfo`]: between-frame and within-frame temporal-information metrics
//!   computed from per-frame object annotations.
//! * [`nn`]: a from-scratch recurrent classifier with a linear embedder,
//!   stacked LSTM, fully connected head, cross-entropy, backpropagation
//!   through time, and Adam.
//! * [`data`]: a seeded synthetic sequence generator, a frame-folder loader,
//!   and the 3:1 train/test split protocol.
//! * [`harness`]: deterministic training experiments, per-epoch CSV records,
//!   convergence/jitter summaries, and sampler comparison tables.

pub mod data;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod sampler;
pub mod tinfo;

pub use data::{LabeledSequence, SequenceDataset, SplitSpec};
pub use harness::{ExperimentConfig, SamplerKind, TrainingRecord};
pub use linalg::Matrix;
pub use nn::{AdamHyper, AdamState, LstmParams, LstmState, Model, ModelParams, ModelSpec};
pub use sampler::{SamplerConfig, SubBatch, WindowPlan};
pub use tinfo::{FrameObject, FrameScene, TemporalInfoReport};
