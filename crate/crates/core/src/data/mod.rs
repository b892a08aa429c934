//! Labeled sequence data: a controllable synthetic generator, a
//! frame-folder reader, and the seeded 3:1 split protocol.
//!
//! Every loader and generator is deterministic under a fixed seed and
//! produces bit-identical datasets across runs, which the training harness
//! depends on for its reproducibility guarantees.

pub mod frames;
pub mod split;
pub mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::Matrix;

pub use frames::load_frame_folders;
pub use split::{shuffle_test, split_train_test, split_train_test_stratified, SplitSpec};
pub use synthetic::{
    generate_from_manifest, generate_synthetic, generate_synthetic_counts, spread_total,
    SyntheticManifest,
};

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dataset root {path} contains no video folders")]
    EmptyRoot { path: PathBuf },
    #[error("cannot read frame file {path}: {reason}")]
    UnreadableFrame { path: PathBuf, reason: String },
    #[error("frame {path} has {got} features, expected {expected}")]
    InconsistentFeatureDim {
        path: PathBuf,
        expected: usize,
        got: usize,
    },
    #[error("video folder {path} contains no frames")]
    EmptyVideo { path: PathBuf },
    #[error("dataset has no sequences")]
    EmptyDataset,
    #[error("invalid dataset parameters: {reason}")]
    InvalidParams { reason: String },
}

/// One video worth of data: a `T × D` feature matrix, its class index, and
/// the identifier it came from (folder name or generator id).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    pub features: Matrix,
    pub label: usize,
    pub source_id: String,
}

impl LabeledSequence {
    pub fn seq_len(&self) -> usize {
        self.features.rows()
    }
}

/// An immutable collection of labeled sequences with a shared feature width
/// and class vocabulary. `class_names[label]` names each class.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDataset {
    pub sequences: Vec<LabeledSequence>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_names: Vec<String>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Checks the structural invariants every producer must uphold: label
    /// range, matching class-name table, consistent finite features, and at
    /// least one timestep per sequence.
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |reason: String| Err(DataError::InvalidParams { reason });
        if self.class_names.len() != self.num_classes {
            return fail(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            ));
        }
        for s in &self.sequences {
            if s.label >= self.num_classes {
                return fail(format!(
                    "sequence {} has label {} but there are {} classes",
                    s.source_id, s.label, self.num_classes
                ));
            }
            if s.features.cols() != self.feature_dim {
                return fail(format!(
                    "sequence {} has feature width {}, dataset expects {}",
                    s.source_id,
                    s.features.cols(),
                    self.feature_dim
                ));
            }
            if s.features.rows() == 0 {
                return fail(format!("sequence {} has no timesteps", s.source_id));
            }
            if !s.features.is_finite() {
                return fail(format!("sequence {} has non-finite features", s.source_id));
            }
        }
        Ok(())
    }
}
