use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{ModelParams, ModelSpec};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::propagation::PropagationConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PPINFCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

/// Configuration stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub spec: ModelSpec,
    pub propagation: PropagationConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub propagation: PropagationConfig,
    pub train: TrainConfig,
}

/// Layout: magic, u32 version, u64 config length, config JSON, u64
/// parameter count, f64 payload, SHA-256 of everything before it.
/// Integers and floats are little-endian.
pub fn encode_checkpoint(params: &ModelParams, pcfg: &PropagationConfig, tcfg: &TrainConfig) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&CheckpointConfig {
        spec: *params.spec(),
        propagation: *pcfg,
        train: tcfg.clone(),
    })?;
    let values = params.flat_view();
    let mut out = Vec::with_capacity(32 + config.len() + 8 * values.len() + CHECKSUM_LEN);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 + 8 + 8 + CHECKSUM_LEN || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unknown format version {version}")));
    }
    let mut pos: usize = 12;
    let mut take = |len: usize| -> Result<&[u8]> {
        let end = pos.checked_add(len).filter(|&e| e <= body.len()).ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &body[pos..end];
        pos = end;
        Ok(s)
    };
    let config_len = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let config: CheckpointConfig = serde_json::from_slice(take(config_len)?)?;
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    if count != config.spec.param_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match the stored model shape ({})",
            config.spec.param_count()
        )));
    }
    let payload = take(count.checked_mul(8).ok_or_else(|| bad("parameter count overflows"))?)?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if pos != body.len() {
        return Err(bad("trailing bytes before checksum"));
    }
    Ok(Checkpoint {
        params: ModelParams::from_flat(config.spec, values)?,
        propagation: config.propagation,
        train: config.train,
    })
}

pub fn save_checkpoint(params: &ModelParams, pcfg: &PropagationConfig, tcfg: &TrainConfig, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params, pcfg, tcfg)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
