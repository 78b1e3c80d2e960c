//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "SBPRIOR\0"
//! version u32      1
//! hlen    u64      length of the JSON header in bytes
//! header  hlen     UTF-8 JSON: {version, dtype, model, vocab_digest, tensors: [{name, shape, offset}]}
//! data    ...      tensors back to back in header order, each element in `dtype`
//! ```
//!
//! `offset` is in bytes from the start of the data section.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::ModelConfig;
use super::model::Model;
use super::params::Params;
use crate::io::write_atomic;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"SBPRIOR\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint stores {found}, requested {wanted}")]
    Dtype { found: String, wanted: &'static str },
    #[error("vocabulary digest mismatch: checkpoint {checkpoint}, vocabulary {vocabulary}")]
    VocabMismatch { checkpoint: String, vocabulary: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub dtype: String,
    pub model: ModelConfig,
    pub vocab_digest: String,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub vocab_digest: String,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut offset = 0;
        for (name, t) in self.model.params.named() {
            tensors.push(TensorEntry {
                name,
                shape: t.shape.clone(),
                offset,
            });
            offset += t.data.len() * T::BYTES;
        }
        let header = CheckpointHeader {
            version: FORMAT_VERSION,
            dtype: T::DTYPE.to_string(),
            model: self.model.config.clone(),
            vocab_digest: self.vocab_digest.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.model.params.named() {
            for &v in &t.data {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let (header, data) = read_header(bytes)?;
        if header.dtype != T::DTYPE {
            return Err(CheckpointError::Dtype {
                found: header.dtype,
                wanted: T::DTYPE,
            });
        }
        header
            .model
            .check(1)
            .map_err(CheckpointError::Malformed)?;
        let mut params: Params<T> = Params::init(&header.model, 0.0, 0);
        let names: Vec<(String, Vec<usize>)> = params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.shape.clone()))
            .collect();
        if names.len() != header.tensors.len() {
            return Err(CheckpointError::Malformed(format!(
                "expected {} tensors, found {}",
                names.len(),
                header.tensors.len()
            )));
        }
        for ((tensor, (name, shape)), entry) in params
            .tensors_mut()
            .into_iter()
            .zip(&names)
            .zip(&header.tensors)
        {
            if &entry.name != name || &entry.shape != shape {
                return Err(CheckpointError::Malformed(format!(
                    "tensor {} {:?} does not match expected {name} {shape:?}",
                    entry.name, entry.shape
                )));
            }
            let end = entry.offset + tensor.data.len() * T::BYTES;
            let raw = data.get(entry.offset..end).ok_or_else(|| {
                CheckpointError::Malformed(format!("tensor {name} runs past end of file"))
            })?;
            for (v, chunk) in tensor.data.iter_mut().zip(raw.chunks_exact(T::BYTES)) {
                *v = T::read_le(chunk);
            }
        }
        Ok(Self {
            model: Model {
                config: header.model,
                params,
            },
            vocab_digest: header.vocab_digest,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Fails unless the checkpoint was trained with the vocabulary of `digest`.
    pub fn check_vocab(&self, digest: &str) -> Result<(), CheckpointError> {
        if self.vocab_digest != digest {
            return Err(CheckpointError::VocabMismatch {
                checkpoint: self.vocab_digest.clone(),
                vocabulary: digest.to_string(),
            });
        }
        Ok(())
    }

    /// SHA-256 of the serialized bytes, hex.
    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses only the header, e.g. to find the dtype before loading.
pub fn read_header(bytes: &[u8]) -> Result<(CheckpointHeader, &[u8]), CheckpointError> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let json = bytes
        .get(20..20 + hlen)
        .ok_or_else(|| CheckpointError::Malformed("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(json).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok((header, &bytes[20 + hlen..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckpt<T: Scalar>() -> Checkpoint<T> {
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 12,
            context: 10,
            vocab_size: 7,
            dropout: 0.0,
        };
        Checkpoint {
            model: Model::new(cfg, 5).unwrap(),
            vocab_digest: "abc".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = ckpt::<f32>();
        let back = Checkpoint::<f32>::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        let c = ckpt::<f64>();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        c.save(&p).unwrap();
        assert_eq!(Checkpoint::<f64>::load(&p).unwrap(), c);
    }

    #[test]
    fn rejects_wrong_dtype_magic_and_vocab() {
        let bytes = ckpt::<f32>().to_bytes();
        assert!(matches!(
            Checkpoint::<f64>::from_bytes(&bytes),
            Err(CheckpointError::Dtype { .. })
        ));
        assert!(matches!(
            Checkpoint::<f32>::from_bytes(b"nope"),
            Err(CheckpointError::BadMagic)
        ));
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(ckpt::<f32>().check_vocab("abd").is_err());
        assert!(ckpt::<f32>().check_vocab("abc").is_ok());
    }

    #[test]
    fn header_lists_named_shapes() {
        let bytes = ckpt::<f32>().to_bytes();
        let (h, data) = read_header(&bytes).unwrap();
        assert_eq!(h.tensors[0].name, "tok_emb");
        assert_eq!(h.tensors[0].shape, vec![7, 8]);
        assert_eq!(h.tensors.last().unwrap().name, "head_b");
        assert_eq!(data.len(), h.model.parameter_count() * 4);
    }
}
