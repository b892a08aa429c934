//! Model checkpoints.
//!
//! Binary layout, little-endian throughout:
//!
//! | bytes | content                                          |
//! |-------|--------------------------------------------------|
//! | 8     | magic `RESTEPCK`                                 |
//! | 4     | format version (u32, currently 1)                |
//! | 4     | JSON header length in bytes (u32)                |
//! | ...   | JSON header: `{ spec, feature_dim, param_count }` |
//! | ...   | `param_count` f64 values in canonical tensor order |
//!
//! The header fixes every tensor shape, so the payload needs no per-tensor
//! framing; it is the exact output of [`ModelParams::flatten`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Model, ModelParams, ModelSpec};
use super::NnError;

pub const MAGIC: &[u8; 8] = b"RESTEPCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {got} (expected {VERSION})")]
    UnsupportedVersion { got: u32 },
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("payload holds {got} parameters, header promises {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("checkpoint contents are inconsistent: {0}")]
    Model(#[from] NnError),
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    feature_dim: usize,
    param_count: usize,
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    let header = Header {
        spec: model.spec().clone(),
        feature_dim: model.feature_dim(),
        param_count: model.params.param_count(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for v in model.params.flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { got: version });
    }
    r.read_exact(&mut word)?;
    let header_len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut payload = Vec::with_capacity(header.param_count);
    let mut buf = [0u8; 8];
    loop {
        match r.read_exact(&mut buf) {
            Ok(()) => payload.push(f64::from_le_bytes(buf)),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
    }
    if payload.len() != header.param_count {
        return Err(CheckpointError::PayloadLength {
            expected: header.param_count,
            got: payload.len(),
        });
    }

    let mut params = ModelParams::zeros(&header.spec, header.feature_dim);
    if params.param_count() != header.param_count {
        return Err(CheckpointError::PayloadLength {
            expected: params.param_count(),
            got: header.param_count,
        });
    }
    params.set_from_flat(&payload)?;
    Ok(Model::from_parts(header.spec, header.feature_dim, params)?)
}
