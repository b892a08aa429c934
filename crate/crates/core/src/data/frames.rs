//! Frame-folder dataset reader.
//!
//! On-disk layout: one directory per video under a common root, one text
//! file per frame inside it. A frame file holds that frame's feature vector
//! as whitespace-separated numbers (one line or several). Frames are taken
//! in lexicographic file-name order, so frame numbers must be zero-padded
//! (`f001 … f030`).
//!
//! The directory name encodes the class: everything before the final
//! underscore is the label, the rest is a serial number distinguishing
//! videos of the same class (`Jump_1`, `Jump_2`, `Run_1`). A name without an
//! underscore is its own label. Class indices are assigned by sorting the
//! distinct label names, so they are stable across machines.

use std::path::Path;

use crate::linalg::Matrix;

use super::{DataError, LabeledSequence, SequenceDataset};

fn label_of(folder_name: &str) -> &str {
    match folder_name.rfind('_') {
        Some(pos) if pos > 0 => &folder_name[..pos],
        _ => folder_name,
    }
}

fn read_frame(path: &Path) -> Result<Vec<f64>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::UnreadableFrame {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut values = Vec::new();
    for token in text.split_whitespace() {
        let v: f64 = token.parse().map_err(|_| DataError::UnreadableFrame {
            path: path.to_path_buf(),
            reason: format!("not a number: {token:?}"),
        })?;
        if !v.is_finite() {
            return Err(DataError::UnreadableFrame {
                path: path.to_path_buf(),
                reason: format!("non-finite value {v}"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(DataError::UnreadableFrame {
            path: path.to_path_buf(),
            reason: "no feature values".to_string(),
        });
    }
    Ok(values)
}

/// Loads every video folder under `root` into one dataset.
pub fn load_frame_folders(root: &Path) -> Result<SequenceDataset, DataError> {
    let mut folders: Vec<std::path::PathBuf> = std::fs::read_dir(root)
        .map_err(|e| DataError::UnreadableFrame {
            path: root.to_path_buf(),
            reason: e.to_string(),
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    folders.sort();
    if folders.is_empty() {
        return Err(DataError::EmptyRoot {
            path: root.to_path_buf(),
        });
    }

    let mut feature_dim: Option<usize> = None;
    let mut raw: Vec<(String, Matrix)> = Vec::with_capacity(folders.len());
    for folder in &folders {
        let mut frame_files: Vec<std::path::PathBuf> = std::fs::read_dir(folder)
            .map_err(|e| DataError::UnreadableFrame {
                path: folder.clone(),
                reason: e.to_string(),
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        frame_files.sort();
        if frame_files.is_empty() {
            return Err(DataError::EmptyVideo {
                path: folder.clone(),
            });
        }

        let mut rows = Vec::with_capacity(frame_files.len());
        for file in &frame_files {
            let values = read_frame(file)?;
            let expected = *feature_dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(DataError::InconsistentFeatureDim {
                    path: file.clone(),
                    expected,
                    got: values.len(),
                });
            }
            rows.push(values);
        }
        let name = folder
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let features = Matrix::from_rows(&rows).expect("rows validated as rectangular");
        raw.push((name, features));
    }

    let mut class_names: Vec<String> = raw
        .iter()
        .map(|(name, _)| label_of(name).to_string())
        .collect();
    class_names.sort();
    class_names.dedup();

    let sequences = raw
        .into_iter()
        .map(|(name, features)| {
            let label = class_names
                .binary_search(&label_of(&name).to_string())
                .expect("label present in sorted vocabulary");
            LabeledSequence {
                features,
                label,
                source_id: name,
            }
        })
        .collect();

    let dataset = SequenceDataset {
        sequences,
        num_classes: class_names.len(),
        feature_dim: feature_dim.expect("at least one folder with frames"),
        class_names,
    };
    debug_assert!(dataset.validate().is_ok());
    Ok(dataset)
}
