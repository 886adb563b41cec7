// SPDX-License-Identifier: Apache-2.0

//! Checkpoint container.
//!
//! Layout: the magic `RGCK`, a little-endian `u32` format version, a
//! little-endian `u64` header length, the JSON header, then every tensor
//! listed in the header as little-endian `f64` values, row-major, in header
//! order.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::forward::ClassWeights;
use super::{GnnError, LossTrace, ModelDims, ModelParams, TrainConfig};
use crate::features::FeatureSchema;

const MAGIC: &[u8; 4] = b"RGCK";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Carries the standardization statistics.
    pub schema: FeatureSchema,
    pub config: TrainConfig,
    pub class_weights: ClassWeights,
    pub best_epoch: usize,
    pub history: LossTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub dims: ModelDims,
    pub layer_norm: bool,
    pub tensors: Vec<TensorInfo>,
    pub schema: FeatureSchema,
    pub config: TrainConfig,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub class_weights: ClassWeights,
    pub best_epoch: usize,
    pub history: LossTrace,
}

fn io(e: std::io::Error) -> GnnError {
    GnnError::Io(e.to_string())
}

fn bad(m: impl Into<String>) -> GnnError {
    GnnError::Checkpoint(m.into())
}

impl Checkpoint {
    pub fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: CHECKPOINT_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dims: self.params.dims(),
            layer_norm: self.params.layer_norm(),
            tensors: self
                .params
                .layout()
                .into_iter()
                .map(|(name, shape)| TensorInfo { name, shape })
                .collect(),
            schema: self.schema.clone(),
            config: self.config.clone(),
            config_hash: hex::encode(Sha256::digest(
                serde_json::to_string(&self.config).expect("config serializes").as_bytes(),
            )),
            seed: self.config.seed,
            class_weights: self.class_weights,
            best_epoch: self.best_epoch,
            history: self.history.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut buf = Vec::with_capacity(16 + json.len() + 8 * self.params.parameter_count());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn save(&self, w: &mut impl Write) -> Result<(), GnnError> {
        w.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn load(r: &mut impl Read) -> Result<Self, GnnError> {
        let header = read_header(r)?;
        let mut params = ModelParams::init(header.dims, header.layer_norm, &mut ChaCha8Rng::seed_from_u64(0));
        let layout: Vec<TensorInfo> = params
            .layout()
            .into_iter()
            .map(|(name, shape)| TensorInfo { name, shape })
            .collect();
        if layout != header.tensors {
            return Err(bad("tensor list does not match the declared dimensions"));
        }
        if header.schema.len() != header.dims.input {
            return Err(bad("schema length differs from the input width"));
        }
        for t in params.tensors_mut() {
            let mut raw = vec![0u8; 8 * t.len()];
            r.read_exact(&mut raw).map_err(io)?;
            for (x, b) in t.iter_mut().zip(raw.chunks_exact(8)) {
                *x = f64::from_le_bytes(b.try_into().unwrap());
            }
        }
        if !params.all_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self {
            params,
            schema: header.schema,
            config: header.config,
            class_weights: header.class_weights,
            best_epoch: header.best_epoch,
            history: header.history,
        })
    }
}

/// Reads only the JSON header.
pub fn read_header(r: &mut impl Read) -> Result<CheckpointHeader, GnnError> {
    let mut fixed = [0u8; 16];
    r.read_exact(&mut fixed).map_err(io)?;
    if &fixed[..4] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(fixed[8..16].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::CellLibrary;

    fn sample() -> Checkpoint {
        let schema = FeatureSchema::for_library(&CellLibrary::standard());
        let config = TrainConfig { seed: 4, ..Default::default() };
        let params = ModelParams::init(config.dims(schema.len()), true, &mut ChaCha8Rng::seed_from_u64(4));
        Checkpoint {
            params,
            schema,
            config,
            class_weights: ClassWeights { state: 0.8, data: 0.2 },
            best_epoch: 0,
            history: LossTrace { train_loss: vec![0.7], val_loss: vec![], val_balanced_accuracy: vec![] },
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::load(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn header_only() {
        let c = sample();
        let h = read_header(&mut c.to_bytes().as_slice()).unwrap();
        assert_eq!(h.dims, ModelDims::standard(26));
        assert_eq!(h.tensors[0].name, "sage0.weight");
        assert_eq!(h.seed, 4);
    }

    #[test]
    fn truncated_file() {
        let bytes = sample().to_bytes();
        let err = Checkpoint::load(&mut &bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, GnnError::Io(_)));
    }
}
