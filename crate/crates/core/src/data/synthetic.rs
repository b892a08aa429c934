//! Synthetic sequence classification tasks with tunable frame-to-frame
//! redundancy.
//!
//! Each class owns a base pattern drawn once from a standard normal. A
//! sequence follows a smoothed random walk around its class pattern:
//!
//! ```text
//! state[0] = pattern + noise_scale * g[0]
//! state[t] = r * state[t-1] + (1 - r) * (pattern + noise_scale * g[t])
//! ```
//!
//! with `r` the redundancy in [0, 1] and `g[t]` per-dimension standard
//! normals. At `r = 1` every frame repeats the first one bit-exactly; at
//! `r = 0` frames are independent draws around the pattern. Larger `r` means
//! consecutive frames share more information, imitating slow-moving video.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

use super::{DataError, LabeledSequence, SequenceDataset};

/// Spread of the per-frame noise around the class pattern, relative to the
/// unit-variance patterns.
const NOISE_SCALE: f64 = 0.5;

/// Everything needed to regenerate a synthetic dataset bit-exactly. Written
/// alongside training outputs so runs can be reproduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    /// Sequences per class; the class count is this list's length.
    pub counts: Vec<usize>,
    pub seq_len: usize,
    pub feature_dim: usize,
    pub redundancy: f64,
    pub seed: u64,
}

/// Splits `total` sequences over `num_classes` classes as evenly as
/// possible, earlier classes taking the remainder.
pub fn spread_total(total: usize, num_classes: usize) -> Vec<usize> {
    let base = total / num_classes;
    let rem = total % num_classes;
    (0..num_classes)
        .map(|k| base + usize::from(k < rem))
        .collect()
}

/// Balanced convenience wrapper over [`generate_from_manifest`].
pub fn generate_synthetic(
    num_classes: usize,
    sequences_per_class: usize,
    seq_len: usize,
    feature_dim: usize,
    redundancy: f64,
    seed: u64,
) -> Result<SequenceDataset, DataError> {
    generate_from_manifest(&SyntheticManifest {
        counts: vec![sequences_per_class; num_classes],
        seq_len,
        feature_dim,
        redundancy,
        seed,
    })
}

/// Per-class-count wrapper over [`generate_from_manifest`].
pub fn generate_synthetic_counts(
    counts: &[usize],
    seq_len: usize,
    feature_dim: usize,
    redundancy: f64,
    seed: u64,
) -> Result<SequenceDataset, DataError> {
    generate_from_manifest(&SyntheticManifest {
        counts: counts.to_vec(),
        seq_len,
        feature_dim,
        redundancy,
        seed,
    })
}

/// Generates the dataset a manifest describes. Deterministic: the draw order
/// is class patterns first, then sequences in class-major order, each
/// consuming `seq_len * feature_dim` normals.
pub fn generate_from_manifest(manifest: &SyntheticManifest) -> Result<SequenceDataset, DataError> {
    let invalid = |reason: &str| {
        Err(DataError::InvalidParams {
            reason: reason.to_string(),
        })
    };
    if manifest.counts.is_empty() {
        return invalid("at least one class is required");
    }
    if manifest.counts.contains(&0) {
        return invalid("every class needs at least one sequence");
    }
    if manifest.seq_len == 0 || manifest.feature_dim == 0 {
        return invalid("seq_len and feature_dim must be positive");
    }
    if !(0.0..=1.0).contains(&manifest.redundancy) {
        return invalid("redundancy must lie in [0, 1]");
    }

    let num_classes = manifest.counts.len();
    let d = manifest.feature_dim;
    let r = manifest.redundancy;
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let patterns: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..d).map(|_| normal()).collect())
        .collect();

    let mut sequences = Vec::with_capacity(manifest.counts.iter().sum());
    for (label, &count) in manifest.counts.iter().enumerate() {
        for serial in 0..count {
            let pattern = &patterns[label];
            let mut data = Vec::with_capacity(manifest.seq_len * d);
            let mut state = vec![0.0; d];
            for t in 0..manifest.seq_len {
                for (j, s) in state.iter_mut().enumerate() {
                    let target = pattern[j] + NOISE_SCALE * normal();
                    *s = if t == 0 {
                        target
                    } else {
                        r * *s + (1.0 - r) * target
                    };
                }
                data.extend_from_slice(&state);
            }
            sequences.push(LabeledSequence {
                features: Matrix::from_vec(manifest.seq_len, d, data),
                label,
                source_id: format!("class{label}_{serial:03}"),
            });
        }
    }

    let dataset = SequenceDataset {
        sequences,
        num_classes,
        feature_dim: d,
        class_names: (0..num_classes).map(|k| format!("class{k}")).collect(),
    };
    debug_assert!(dataset.validate().is_ok());
    Ok(dataset)
}
