use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Vocabulary};
use crate::masking::ContextVocabulary;
use crate::model::{Model, ModelConfig};
use crate::nn::Tensor;

const FORMAT: &str = "smigraph-checkpoint";
const VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    /// Offset into the blob, in `f64` values.
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    epoch: usize,
    config: ModelConfig,
    vocabulary: Vocabulary,
    contexts: ContextVocabulary,
    tensors: Vec<TensorEntry>,
    params_sha256: String,
}

/// A trained model together with the vocabularies it was trained on.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub vocabulary: Vocabulary,
    pub contexts: ContextVocabulary,
    pub epoch: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::io(path, e)
}

fn unreadable(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::FileUnreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn corrupt(reason: impl Into<String>) -> PipelineError {
    PipelineError::CorruptCheckpoint(reason.into())
}

impl Checkpoint {
    /// Writes `manifest.json` and a little-endian `f64` blob `params.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut blob = Vec::with_capacity(self.model.store.scalar_count() * 8);
        let mut tensors = Vec::new();
        let mut offset = 0;
        for p in self.model.store.iter() {
            tensors.push(TensorEntry {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                offset,
            });
            offset += p.value.len();
            for v in p.value.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: VERSION,
            epoch: self.epoch,
            config: self.model.config.clone(),
            vocabulary: self.vocabulary.clone(),
            contexts: self.contexts.clone(),
            tensors,
            params_sha256: hex_digest(&blob),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let params = dir.join(PARAMS_FILE);
        fs::write(&params, &blob).map_err(|e| io_err(&params, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| unreadable(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if manifest.format != FORMAT || manifest.version != VERSION {
            return Err(corrupt(format!("unsupported format {} v{}", manifest.format, manifest.version)));
        }
        let params = dir.join(PARAMS_FILE);
        let blob = fs::read(&params).map_err(|e| unreadable(&params, e))?;
        if hex_digest(&blob) != manifest.params_sha256 {
            return Err(corrupt("parameter blob checksum mismatch"));
        }
        if blob.len() % 8 != 0 {
            return Err(corrupt("parameter blob length is not a multiple of 8"));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for t in &manifest.tensors {
            let end = t.offset + t.rows * t.cols;
            let data = values.get(t.offset..end).ok_or_else(|| corrupt(format!("{} past blob end", t.name)))?;
            tensors.push((t.name.clone(), Tensor::from_vec(t.rows, t.cols, data.to_vec())?));
        }
        let mut model = Model::new(manifest.config, 0)?;
        model.store.load_values(tensors)?;
        Ok(Checkpoint {
            model,
            vocabulary: manifest.vocabulary,
            contexts: manifest.contexts,
            epoch: manifest.epoch,
        })
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
