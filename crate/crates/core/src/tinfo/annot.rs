//! JSON annotation documents for frame sequences.
//!
//! One document describes one video:
//!
//! ```json
//! {
//!   "video": "street_01",
//!   "frames": [
//!     {
//!       "width": 1920,
//!       "height": 1080,
//!       "objects": [
//!         { "object_id": "car-3", "label": "car",
//!           "box": { "x": 100, "y": 220, "width": 180, "height": 90 } }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! `object_id` must be stable across frames for the same physical object;
//! the between-frame metric matches objects by id, not by geometry. `video`
//! is optional. Loading validates every frame, so downstream metric code
//! only ever sees well-formed scenes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FrameObject, FrameScene, Region, TinfoError};

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("cannot read annotation file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed annotation document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame {frame_index}: {source}")]
    InvalidFrame {
        frame_index: usize,
        source: TinfoError,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
    pub frames: Vec<AnnotationFrame>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFrame {
    pub width: f64,
    pub height: f64,
    pub objects: Vec<AnnotationObject>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationObject {
    pub object_id: String,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoxSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

/// Validates a parsed document into one scene per frame.
pub fn scenes_from_doc(doc: &AnnotationDoc) -> Result<Vec<FrameScene>, AnnotError> {
    doc.frames
        .iter()
        .enumerate()
        .map(|(frame_index, f)| {
            let objects = f
                .objects
                .iter()
                .map(|o| FrameObject {
                    object_id: o.object_id.clone(),
                    label: o.label.clone(),
                    region: Region::Box {
                        x: o.bbox.x,
                        y: o.bbox.y,
                        width: o.bbox.width,
                        height: o.bbox.height,
                    },
                })
                .collect();
            FrameScene::new(f.width, f.height, objects).map_err(|source| AnnotError::InvalidFrame {
                frame_index,
                source,
            })
        })
        .collect()
}

/// Reads and validates an annotation file.
pub fn load_annotations(path: &Path) -> Result<Vec<FrameScene>, AnnotError> {
    let text = std::fs::read_to_string(path)?;
    let doc: AnnotationDoc = serde_json::from_str(&text)?;
    scenes_from_doc(&doc)
}
