use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lstm::{Dims, LstmParams, TENSOR_NAMES};
use super::train::{ModelConfig, TrainConfig};
use crate::codec::{self, Vocabulary};
use crate::domains::DomainKind;

pub const FORMAT: &str = "goalrec-lstm/1";

/// SHA-256 over every tensor's little-endian f64 bytes, in layout order.
pub fn param_checksum(p: &LstmParams) -> String {
    let mut h = Sha256::new();
    for t in p.tensors() {
        for v in t {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// A trained classifier with everything needed to apply it.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    pub domain: DomainKind,
    pub params: LstmParams,
    pub vocab: Vocabulary,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    domain: DomainKind,
    dims: Dims,
    model: ModelConfig,
    train: TrainConfig,
    /// (9-hex-digit state code, token id) pairs.
    vocabulary: Vec<(String, u32)>,
    checksum: String,
    tensors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("checkpoint: {0}")]
    Invalid(String),
}

impl LstmModel {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: FORMAT.to_string(),
            domain: self.domain,
            dims: self.params.dims,
            model: self.model.clone(),
            train: self.train.clone(),
            vocabulary: self.vocab.entries().map(|(c, i)| (format!("{c:09x}"), i)).collect(),
            checksum: param_checksum(&self.params),
            tensors: TENSOR_NAMES.iter().zip(self.params.tensors()).map(|(n, t)| (n.to_string(), t.to_vec())).collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let bad = |m: String| CheckpointError::Invalid(m);
        let mut file: CheckpointFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.format != FORMAT {
            return Err(bad(format!("unsupported format `{}`", file.format)));
        }
        let mut params = LstmParams::zeros(file.dims);
        for (name, slot) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
            let t = file.tensors.remove(*name).ok_or_else(|| bad(format!("missing tensor {name}")))?;
            if t.len() != slot.len() {
                return Err(bad(format!("tensor {name} has {} entries, dims need {}", t.len(), slot.len())));
            }
            *slot = t;
        }
        if let Some(extra) = file.tensors.keys().next() {
            return Err(bad(format!("unexpected tensor {extra}")));
        }
        if !params.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        if param_checksum(&params) != file.checksum {
            return Err(bad("parameter checksum mismatch".into()));
        }
        let entries = file.vocabulary.iter().map(|(c, i)| codec::parse_hex(c).map(|c| (c, *i))).collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
        let vocab = Vocabulary::from_entries(entries).map_err(bad)?;
        if vocab.len() != file.dims.vocab {
            return Err(bad(format!("vocabulary has {} codes, dims say {}", vocab.len(), file.dims.vocab)));
        }
        Ok(LstmModel { domain: file.domain, params, vocab, model: file.model, train: file.train })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()).map_err(|e| CheckpointError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|e| CheckpointError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }
}
