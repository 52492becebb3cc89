//! Binary weight container.
//!
//! Layout: the magic bytes `MUPW`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a JSON header of that length, then
//! every tensor as row-major little-endian `f32`. The header records the
//! model configuration and a directory of `(name, shape, offset)` entries,
//! with offsets in bytes from the start of the payload.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{DurationVocab, SequenceKind};
use crate::scorer::{ModelConfig, ModelParams};
use crate::Model;

pub const MAGIC: &[u8; 4] = b"MUPW";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a weight file of a supported format version ({0})")]
    FormatVersion(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("payload has {found} bytes, header describes {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error("tensor {tensor}: {message}")]
    ShapeMismatch { tensor: String, message: String },
    #[error("weight file lacks the sequence kind or duration vocabulary")]
    MissingModelState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<SequenceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    durations: Option<Vec<Rational64>>,
    tensors: Vec<TensorEntry>,
}

/// Decoded contents of a weight file.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFile {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub kind: Option<SequenceKind>,
    pub vocab: Option<DurationVocab>,
}

pub fn encode(file: &WeightFile) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut offset = 0;
    for (name, t) in &file.params.tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: [t.nrows(), t.ncols()],
            offset,
        });
        offset += t.len() * 4;
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        config: file.config.clone(),
        kind: file.kind,
        durations: file.vocab.as_ref().map(|v| v.entries().to_vec()),
        tensors: entries,
    };
    let header = serde_json::to_vec(&header).expect("header always serializes");
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in file.params.tensors.values() {
        for &v in t.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parse a complete weight file. Nothing is returned unless every tensor
/// is present and the payload length matches exactly.
pub fn decode(bytes: &[u8]) -> Result<WeightFile, WeightError> {
    if bytes.len() < PREAMBLE || &bytes[..4] != MAGIC {
        return Err(WeightError::FormatVersion("missing magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(WeightError::FormatVersion(format!("version {}", version)));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[PREAMBLE..];
    if header_len > body.len() {
        return Err(WeightError::FormatVersion("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])
        .map_err(|e| WeightError::Header(e.to_string()))?;
    if header.format_version != version {
        return Err(WeightError::FormatVersion(format!(
            "header version {}",
            header.format_version
        )));
    }
    let payload = &body[header_len..];
    let expected: usize = header
        .tensors
        .iter()
        .map(|e| e.shape[0] * e.shape[1] * 4)
        .sum();
    if payload.len() != expected {
        return Err(WeightError::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let mut tensors = BTreeMap::new();
    for e in &header.tensors {
        let n = e.shape[0] * e.shape[1];
        let end = e.offset.checked_add(n * 4).filter(|&end| end <= payload.len());
        let Some(end) = end else {
            return Err(WeightError::Header(format!("tensor {} lies outside the payload", e.name)));
        };
        let values: Vec<f64> = payload[e.offset..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        let t = Array2::from_shape_vec((e.shape[0], e.shape[1]), values)
            .map_err(|err| WeightError::Header(err.to_string()))?;
        if tensors.insert(e.name.clone(), t).is_some() {
            return Err(WeightError::Header(format!("tensor {} listed twice", e.name)));
        }
    }
    let params = ModelParams { tensors };
    check_config(&params, &header.config)?;
    let vocab = match header.durations {
        Some(d) => Some(DurationVocab::new(d).map_err(|e| WeightError::Header(e.to_string()))?),
        None => None,
    };
    Ok(WeightFile {
        config: header.config,
        params,
        kind: header.kind,
        vocab,
    })
}

fn check_config(params: &ModelParams, cfg: &ModelConfig) -> Result<(), WeightError> {
    for (name, shape) in cfg.tensor_shapes() {
        match params.tensors.get(&name) {
            None => {
                return Err(WeightError::ShapeMismatch {
                    tensor: name,
                    message: "missing".into(),
                })
            }
            Some(t) if t.dim() != shape => {
                return Err(WeightError::ShapeMismatch {
                    tensor: name,
                    message: format!("shape {:?}, configuration expects {:?}", t.dim(), shape),
                })
            }
            Some(_) => {}
        }
    }
    let expected = cfg.tensor_shapes();
    if let Some(extra) = params.names().find(|n| !expected.iter().any(|(e, _)| e == n)) {
        return Err(WeightError::ShapeMismatch {
            tensor: extra.to_string(),
            message: "not part of the configuration".into(),
        });
    }
    Ok(())
}

fn read(path: &Path) -> Result<WeightFile, WeightError> {
    let bytes = fs::read(path).map_err(|source| WeightError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Write to a sibling temporary file and rename, so a crash never leaves a
/// partial weight file behind.
fn write(path: &Path, bytes: &[u8]) -> Result<(), WeightError> {
    let io = |source| WeightError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn save_weights(params: &ModelParams, cfg: &ModelConfig, path: &Path) -> Result<(), WeightError> {
    write(
        path,
        &encode(&WeightFile {
            config: cfg.clone(),
            params: params.clone(),
            kind: None,
            vocab: None,
        }),
    )
}

/// Load parameters, checking them against `expected` when given.
pub fn load_weights(
    path: &Path,
    expected: Option<&ModelConfig>,
) -> Result<(ModelConfig, ModelParams), WeightError> {
    let file = read(path)?;
    if let Some(cfg) = expected {
        check_config(&file.params, cfg)?;
    }
    Ok((file.config, file.params))
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), WeightError> {
    write(
        path,
        &encode(&WeightFile {
            config: model.config.clone(),
            params: model.params.clone(),
            kind: Some(model.kind),
            vocab: Some(model.vocab.clone()),
        }),
    )
}

pub fn load_model(path: &Path) -> Result<Model, WeightError> {
    let file = read(path)?;
    match (file.kind, file.vocab) {
        (Some(kind), Some(vocab)) => Ok(Model {
            config: file.config,
            params: file.params,
            kind,
            vocab,
        }),
        _ => Err(WeightError::MissingModelState),
    }
}
