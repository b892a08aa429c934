//! Seeded train/test splitting at the fixed 3:1 ratio, and test-set
//! shuffling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, LabeledSequence, SequenceDataset};

/// Split protocol: three quarters train, one quarter test, ordered by a
/// seeded uniform shuffle. The ratio is fixed; only the seed varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
}

/// Train-side size for `total` sequences: 3/4 of the total, rounded to the
/// nearest integer with halves rounding up.
pub fn train_count(total: usize) -> usize {
    (3 * total + 2) / 4
}

/// Rebuilds two datasets from one, moving each sequence to the side its
/// index landed on.
fn partition_by_indices(
    dataset: SequenceDataset,
    first: &[usize],
    second: &[usize],
) -> (SequenceDataset, SequenceDataset) {
    let SequenceDataset {
        sequences,
        num_classes,
        feature_dim,
        class_names,
    } = dataset;
    let mut pool: Vec<Option<LabeledSequence>> = sequences.into_iter().map(Some).collect();
    let mut take = |indices: &[usize]| SequenceDataset {
        sequences: indices
            .iter()
            .map(|&i| pool[i].take().expect("each index used once"))
            .collect(),
        num_classes,
        feature_dim,
        class_names: class_names.clone(),
    };
    let a = take(first);
    let b = take(second);
    (a, b)
}

/// Splits a dataset into train and test halves: seeded uniform shuffle of
/// the sequence order, then the first three quarters (rounded) become the
/// training set. The two halves partition the input exactly.
pub fn split_train_test(
    dataset: SequenceDataset,
    spec: &SplitSpec,
) -> Result<(SequenceDataset, SequenceDataset), DataError> {
    if dataset.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let cut = train_count(dataset.len());
    let (train_idx, test_idx) = order.split_at(cut);
    Ok(partition_by_indices(dataset, train_idx, test_idx))
}

/// Per-class variant of [`split_train_test`]: each class is shuffled and cut
/// at 3/4 separately, so class proportions match exactly on both sides. This
/// is not the default protocol; the global split is.
pub fn split_train_test_stratified(
    dataset: SequenceDataset,
    spec: &SplitSpec,
) -> Result<(SequenceDataset, SequenceDataset), DataError> {
    if dataset.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for label in 0..dataset.num_classes {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.sequences[i].label == label)
            .collect();
        members.shuffle(&mut rng);
        let cut = train_count(members.len());
        train_idx.extend_from_slice(&members[..cut]);
        test_idx.extend_from_slice(&members[cut..]);
    }
    Ok(partition_by_indices(dataset, &train_idx, &test_idx))
}

/// Reorders the sequences with a seeded permutation; contents untouched.
pub fn shuffle_test(dataset: &mut SequenceDataset, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dataset.sequences.shuffle(&mut rng);
}
