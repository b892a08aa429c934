//! Deterministic training experiments comparing batch sampling strategies.
//!
//! An [`ExperimentConfig`] fully determines a run: dataset, split, model
//! initialization, dropout draws, and test order all derive from one master
//! seed through fixed role offsets, so identical configs produce
//! bit-identical metric streams. The shared artifacts (dataset, split,
//! initial parameters, evaluation order) are hashed so that multi-variant
//! comparisons can prove they differed only in the sampler.
//!
//! Training walks each video, chunks its frames into batches of
//! `batch_size`, and turns every batch into model input sequences: the plain
//! batch sampler feeds the whole batch as one sequence, while the stepped
//! sampler feeds each overlapping window as its own sequence. Every sequence
//! carries the video's label. Optimizer updates happen per sub-batch or once
//! per batch with averaged gradients, per the configured granularity.

pub mod compare;
pub mod csv;
pub mod metrics;
pub mod plot;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    generate_synthetic_counts, load_frame_folders, shuffle_test, split_train_test,
    split_train_test_stratified, spread_total, DataError, SequenceDataset, SplitSpec,
    SyntheticManifest,
};
use crate::linalg::mean;
use crate::nn::{
    adam_step, cross_entropy, AdamHyper, AdamState, Model, ModelParams, ModelSpec, NnError,
};
use crate::sampler::{stepped_stream, SamplerConfig, SamplerError};

pub use compare::{compare, CompareOutput, ComparisonRow, ComparisonTable};
pub use csv::{emit_csv, parse_records_csv, render_records_csv};
pub use metrics::{
    convergence_metrics, default_loss_threshold, ConvergenceSummary, DEFAULT_TAIL_WINDOW,
};
pub use plot::{curves_script, PlotSeries};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {reason}")]
    ConfigInvalid { reason: String },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv row {line} is malformed: {reason}")]
    CsvParse { line: usize, reason: String },
    #[error("tail window {window} must be between 1 and the record count {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("epoch {epoch} performed no updates; the sampler configuration drops every batch")]
    NoUpdates { epoch: usize },
    #[error("shared artifact diverged across variants: {what}")]
    SharedArtifactDiverged { what: &'static str },
}

/// Which sampler turns a batch of frames into model input sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SamplerKind {
    /// The whole batch is one input sequence.
    PlainBatch { batch_size: usize },
    /// Overlapping windows of `step_size` frames, starts `step_stride` apart.
    Stepped {
        batch_size: usize,
        step_size: usize,
        step_stride: usize,
    },
}

impl SamplerKind {
    /// Row label used in comparison tables.
    pub fn label(&self) -> String {
        match self {
            SamplerKind::PlainBatch { .. } => "BatchSampler".to_string(),
            SamplerKind::Stepped { step_stride, .. } => format!("stride {step_stride} stepped"),
        }
    }
}

/// Where the experiment's sequences come from. Synthetic generation sizes
/// classes either uniformly (`sequences_per_class`) or by spreading a total
/// as evenly as possible (`total_sequences`); exactly one must be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        num_classes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sequences_per_class: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_sequences: Option<usize>,
        seq_len: usize,
        feature_dim: usize,
        redundancy: f64,
    },
    FrameFolders {
        root: PathBuf,
    },
}

/// One optimizer step per window, or one per batch with averaged gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateGranularity {
    #[default]
    PerSubBatch,
    PerBatchAccumulate,
}

/// What happens to a trailing batch shorter than `batch_size`: re-window it
/// at its own length (skipping it with a warning if even one stepped window
/// cannot fit), or drop it outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    #[default]
    Rewindow,
    Drop,
}

/// A fully reproducible experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sampler: SamplerKind,
    pub model: ModelSpec,
    pub dataset: DatasetSource,
    /// Master seed; dataset, split, init, dropout, and test order derive
    /// from it via fixed roles.
    pub seed: u64,
    pub epochs: usize,
    #[serde(default)]
    pub optimizer: AdamHyper,
    #[serde(default)]
    pub update_granularity: UpdateGranularity,
    #[serde(default)]
    pub tail_policy: TailPolicy,
    /// Per-class split instead of the default global split.
    #[serde(default)]
    pub stratified_split: bool,
}

/// Independent random streams derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedRole {
    Dataset = 0,
    Split = 1,
    TestShuffle = 2,
    Init = 3,
    Dropout = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-role seed derivation; identical across platforms and runs.
pub fn derive_seed(master: u64, role: SeedRole) -> u64 {
    splitmix64(master.wrapping_add(((role as u64) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// One epoch's metrics. Epochs are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's update steps.
    pub train_loss: f64,
    /// Fraction of the test set classified correctly in eval mode.
    pub test_accuracy: f64,
}

/// FNV-1a hashes of the artifacts that must match across the variants of a
/// comparison; any difference means the runs varied in more than the sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ArtifactHashes {
    pub dataset: u64,
    pub split: u64,
    pub init_params: u64,
    pub eval_order: u64,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrainingRecord>,
    pub hashes: ArtifactHashes,
    /// Update steps performed in each epoch (constant across epochs).
    pub updates_per_epoch: usize,
    pub model: Model,
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn hash_dataset(ds: &SequenceDataset) -> u64 {
    let mut h = Fnv::new();
    h.update(&(ds.num_classes as u64).to_le_bytes());
    h.update(&(ds.feature_dim as u64).to_le_bytes());
    for s in &ds.sequences {
        h.update(s.source_id.as_bytes());
        h.update(&[0xff]);
        h.update(&(s.label as u64).to_le_bytes());
        h.update(&(s.features.rows() as u64).to_le_bytes());
        for v in s.features.data() {
            h.update(&v.to_bits().to_le_bytes());
        }
    }
    h.finish()
}

fn hash_id_order(parts: &[&SequenceDataset]) -> u64 {
    let mut h = Fnv::new();
    for ds in parts {
        for s in &ds.sequences {
            h.update(s.source_id.as_bytes());
            h.update(&[0xff]);
        }
        h.update(&[0x00]);
    }
    h.finish()
}

fn hash_params(params: &ModelParams) -> u64 {
    let mut h = Fnv::new();
    for v in params.flatten() {
        h.update(&v.to_bits().to_le_bytes());
    }
    h.finish()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |reason: String| Err(HarnessError::ConfigInvalid { reason });
        self.model.validate()?;
        match &self.sampler {
            SamplerKind::PlainBatch { batch_size } => {
                if *batch_size == 0 {
                    return invalid("batch_size must be positive".to_string());
                }
            }
            SamplerKind::Stepped {
                batch_size,
                step_size,
                step_stride,
            } => {
                SamplerConfig::new(*batch_size, *step_size, *step_stride).validate()?;
            }
        }
        if let DatasetSource::Synthetic {
            num_classes,
            sequences_per_class,
            total_sequences,
            seq_len,
            feature_dim,
            redundancy,
        } = &self.dataset
        {
            match (sequences_per_class, total_sequences) {
                (Some(_), Some(_)) | (None, None) => {
                    return invalid(
                        "set exactly one of sequences_per_class and total_sequences".to_string(),
                    );
                }
                (Some(0), _) | (_, Some(0)) => {
                    return invalid("synthetic dataset needs at least one sequence".to_string());
                }
                _ => {}
            }
            if *num_classes == 0 || *seq_len == 0 || *feature_dim == 0 {
                return invalid("synthetic dataset dimensions must be positive".to_string());
            }
            if !(0.0..=1.0).contains(redundancy) {
                return invalid("redundancy must lie in [0, 1]".to_string());
            }
            if *num_classes != self.model.num_classes {
                return invalid(format!(
                    "model expects {} classes but the dataset defines {}",
                    self.model.num_classes, num_classes
                ));
            }
        }
        Ok(())
    }

    /// The manifest that regenerates this config's synthetic dataset, if it
    /// uses one.
    pub fn dataset_manifest(&self) -> Option<SyntheticManifest> {
        match &self.dataset {
            DatasetSource::Synthetic {
                num_classes,
                sequences_per_class,
                total_sequences,
                seq_len,
                feature_dim,
                redundancy,
            } => {
                let counts = match (sequences_per_class, total_sequences) {
                    (Some(per), None) => vec![*per; *num_classes],
                    (None, Some(total)) => spread_total(*total, *num_classes),
                    _ => return None,
                };
                Some(SyntheticManifest {
                    counts,
                    seq_len: *seq_len,
                    feature_dim: *feature_dim,
                    redundancy: *redundancy,
                    seed: derive_seed(self.seed, SeedRole::Dataset),
                })
            }
            DatasetSource::FrameFolders { .. } => None,
        }
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn load_dataset(config: &ExperimentConfig) -> Result<SequenceDataset, HarnessError> {
    match &config.dataset {
        DatasetSource::Synthetic { .. } => {
            let manifest = config.dataset_manifest().expect("synthetic source");
            Ok(generate_synthetic_counts(
                &manifest.counts,
                manifest.seq_len,
                manifest.feature_dim,
                manifest.redundancy,
                manifest.seed,
            )?)
        }
        DatasetSource::FrameFolders { root } => Ok(load_frame_folders(root)?),
    }
}

/// The frame ranges each optimizer batch feeds through the model, for one
/// video of `seq_len` frames. Outer vec: batches; inner vec: one range per
/// input sequence.
fn batches_for_video(
    seq_len: usize,
    sampler: &SamplerKind,
    tail: TailPolicy,
) -> Result<Vec<Vec<std::ops::Range<usize>>>, HarnessError> {
    match sampler {
        SamplerKind::PlainBatch { batch_size } => {
            let mut out = Vec::new();
            let mut start = 0;
            while start < seq_len {
                let end = (start + batch_size).min(seq_len);
                if end - start < *batch_size && tail == TailPolicy::Drop {
                    break;
                }
                let window = start..end;
                out.push(vec![window]);
                start = end;
            }
            Ok(out)
        }
        SamplerKind::Stepped {
            batch_size,
            step_size,
            step_stride,
        } => {
            let cfg = SamplerConfig::new(*batch_size, *step_size, *step_stride);
            let mut grouped: Vec<Vec<std::ops::Range<usize>>> = Vec::new();
            for (batch_index, sub) in stepped_stream(seq_len, &cfg, tail == TailPolicy::Drop)? {
                while grouped.len() <= batch_index {
                    grouped.push(Vec::new());
                }
                let lo = sub.indices[0];
                grouped[batch_index].push(lo..lo + sub.indices.len());
            }
            grouped.retain(|g| !g.is_empty());
            Ok(grouped)
        }
    }
}

/// Eval-mode accuracy over a whole dataset.
pub fn evaluate(model: &Model, data: &SequenceDataset) -> Result<f64, HarnessError> {
    let mut correct = 0usize;
    for s in &data.sequences {
        if model.predict(&s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Runs an experiment and keeps only the per-epoch records.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrainingRecord>, HarnessError> {
    run_experiment_full(config).map(|out| out.records)
}

/// Runs an experiment end to end: load, split, shuffle the test side, train
/// for the configured epochs, and evaluate after each one.
pub fn run_experiment_full(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;

    let dataset = load_dataset(config)?;
    dataset.validate()?;
    if dataset.num_classes != config.model.num_classes {
        return Err(HarnessError::ConfigInvalid {
            reason: format!(
                "model expects {} classes but the dataset provides {}",
                config.model.num_classes, dataset.num_classes
            ),
        });
    }
    let feature_dim = dataset.feature_dim;
    let dataset_hash = hash_dataset(&dataset);

    let split_spec = SplitSpec {
        seed: derive_seed(config.seed, SeedRole::Split),
    };
    let (train, mut test) = if config.stratified_split {
        split_train_test_stratified(dataset, &split_spec)?
    } else {
        split_train_test(dataset, &split_spec)?
    };
    if test.is_empty() {
        return Err(HarnessError::ConfigInvalid {
            reason: "dataset too small to leave a test split".to_string(),
        });
    }
    let split_hash = hash_id_order(&[&train, &test]);
    shuffle_test(&mut test, derive_seed(config.seed, SeedRole::TestShuffle));
    let eval_hash = hash_id_order(&[&test]);

    let mut model = Model::init(
        config.model.clone(),
        feature_dim,
        derive_seed(config.seed, SeedRole::Init),
    )?;
    let init_hash = hash_params(&model.params);

    let mut adam = AdamState::new(model.params.param_count());
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SeedRole::Dropout));

    let mut records = Vec::with_capacity(config.epochs);
    let mut updates_per_epoch = 0;
    for epoch in 1..=config.epochs {
        let mut losses = Vec::new();
        for video in &train.sequences {
            let groups = batches_for_video(video.seq_len(), &config.sampler, config.tail_policy)?;
            for group in groups {
                match config.update_granularity {
                    UpdateGranularity::PerSubBatch => {
                        for range in group {
                            let feats = video.features.slice_rows(range);
                            let (logits, cache) = model.forward(&feats, Some(&mut dropout_rng))?;
                            losses.push(cross_entropy(&logits, video.label)?);
                            let grads = model.backward(&cache, video.label)?;
                            adam_step(&mut model.params, &grads, &mut adam, &config.optimizer)?;
                        }
                    }
                    UpdateGranularity::PerBatchAccumulate => {
                        let mut acc = ModelParams::zeros(&config.model, feature_dim);
                        let mut batch_loss = 0.0;
                        let count = group.len();
                        for range in group {
                            let feats = video.features.slice_rows(range);
                            let (logits, cache) = model.forward(&feats, Some(&mut dropout_rng))?;
                            batch_loss += cross_entropy(&logits, video.label)?;
                            acc.add_scaled(1.0, &model.backward(&cache, video.label)?)?;
                        }
                        let inv = 1.0 / count as f64;
                        acc.scale(inv);
                        adam_step(&mut model.params, &acc, &mut adam, &config.optimizer)?;
                        losses.push(batch_loss * inv);
                    }
                }
            }
        }
        if losses.is_empty() {
            return Err(HarnessError::NoUpdates { epoch });
        }
        updates_per_epoch = losses.len();
        records.push(TrainingRecord {
            epoch,
            train_loss: mean(&losses),
            test_accuracy: evaluate(&model, &test)?,
        });
    }

    Ok(RunOutput {
        records,
        hashes: ArtifactHashes {
            dataset: dataset_hash,
            split: split_hash,
            init_params: init_hash,
            eval_order: eval_hash,
        },
        updates_per_epoch,
        model,
    })
}
