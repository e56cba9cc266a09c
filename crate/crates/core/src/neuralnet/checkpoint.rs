//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "STKC"                 4 bytes magic
//! version                u32
//! meta length            u64
//! meta                   JSON: model config, pipeline config, seed, scaler feature order
//! weights                f64 × parameter_count, canonical tensor order
//! scaler                 (min f64, max f64) per scaler feature
//! sha256                 32 bytes over everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ModelConfig, ModelParams};
use crate::pipeline::{Feature, MinMax, PipelineConfig, ScalerParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"STKC";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint: expected magic STKC, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found}: expected STKC v{CHECKPOINT_VERSION}")]
    Version { found: u32 },
    #[error("truncated checkpoint: expected {expected} bytes, found {actual} (STKC v{CHECKPOINT_VERSION})")]
    Truncated { expected: usize, actual: usize },
    #[error("corrupt checkpoint: {0} (STKC v{CHECKPOINT_VERSION})")]
    Corrupt(String),
    #[error("checkpoint checksum mismatch (STKC v{CHECKPOINT_VERSION})")]
    Checksum,
    #[error("checkpoint does not fit the model: {0}")]
    Dimension(String),
    #[error("checkpoint io on {path}: {message}")]
    Io { path: String, message: String },
}

/// A trained model together with everything needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub params: ModelParams,
    pub scaler: ScalerParams,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    pipeline: PipelineConfig,
    seed: u64,
    scaler_features: Vec<Feature>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        self.params
            .check_shapes(&self.model)
            .map_err(|e| CheckpointError::Dimension(e.to_string()))?;
        let meta = Meta {
            model: self.model.clone(),
            pipeline: self.pipeline.clone(),
            seed: self.seed,
            scaler_features: self.scaler.features(),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

        let mut out = Vec::with_capacity(
            HEADER_LEN + json.len() + 8 * self.params.parameter_count() + 16 * self.scaler.columns.len() + DIGEST_LEN,
        );
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        self.params.for_each_tensor(|t| {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        });
        for (_, mm) in &self.scaler.columns {
            out.extend_from_slice(&mm.min.to_le_bytes());
            out.extend_from_slice(&mm.max.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let truncated = |expected: usize| CheckpointError::Truncated {
            expected,
            actual: bytes.len(),
        };
        if bytes.len() < 4 {
            return Err(CheckpointError::BadMagic { found: bytes.to_vec() });
        }
        if bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic { found: bytes[..4].to_vec() });
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let json_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let json_end = usize::try_from(json_len)
            .ok()
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| CheckpointError::Corrupt(format!("meta length {json_len}")))?;
        if bytes.len() < json_end {
            return Err(truncated(json_end));
        }
        let meta: Meta = serde_json::from_slice(&bytes[HEADER_LEN..json_end])
            .map_err(|e| CheckpointError::Corrupt(format!("meta: {e}")))?;
        meta.model
            .validate()
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

        let mut params = ModelParams::zeros(&meta.model);
        let n_weights = params.parameter_count();
        let n_scaler = meta.scaler_features.len();
        let expected = json_end + 8 * n_weights + 16 * n_scaler + DIGEST_LEN;
        if bytes.len() < expected {
            return Err(truncated(expected));
        }
        if bytes.len() > expected {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - expected
            )));
        }
        let body = &bytes[..expected - DIGEST_LEN];
        if Sha256::digest(body).as_slice() != &bytes[expected - DIGEST_LEN..] {
            return Err(CheckpointError::Checksum);
        }

        let mut floats = body[json_end..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        params.for_each_tensor_mut(|t| {
            for x in t.iter_mut() {
                *x = floats.next().expect("length checked");
            }
        });
        let columns = meta
            .scaler_features
            .iter()
            .map(|&f| {
                let min = floats.next().expect("length checked");
                let max = floats.next().expect("length checked");
                (f, MinMax { min, max })
            })
            .collect();
        Ok(Checkpoint {
            model: meta.model,
            pipeline: meta.pipeline,
            seed: meta.seed,
            params,
            scaler: ScalerParams { columns },
        })
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let bytes = checkpoint.to_bytes()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads a checkpoint and confirms its weights fit `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<Checkpoint, CheckpointError> {
    let ck = load_checkpoint(path)?;
    let (a, b) = (&ck.model, expected);
    if !a.same_architecture(b) || a.sequence_length != b.sequence_length {
        return Err(CheckpointError::Dimension(format!(
            "checkpoint has sequence_length {}, no_features {}, no_units {}, no_layers {}; \
             expected {}, {}, {}, {}",
            a.sequence_length, a.no_features, a.no_units, a.no_layers,
            b.sequence_length, b.no_features, b.no_units, b.no_layers
        )));
    }
    Ok(ck)
}
