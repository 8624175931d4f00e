//! Checkpoints: a JSON manifest next to a flat little-endian f32 blob.
//!
//! The blob holds every parameter in layout order (see [`super::params`]),
//! each row-major, with no header or padding.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ChanConfig;
use super::network::ChanModel;
use super::params::ChanParams;
use crate::dataset::{read_json, write_json};
use crate::error::{ChanError, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: ChanConfig,
    pub seed: u64,
    pub dtype: String,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub params: Vec<ParamEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `path` (manifest) and `path` with a `.bin` extension (blob).
pub fn save_checkpoint(path: impl AsRef<Path>, model: &ChanModel, metadata: Option<serde_json::Value>) -> Result<()> {
    let path = path.as_ref();
    let blob = blob_path(path);
    let mut bytes = Vec::with_capacity(4 * model.params.num_scalars());
    for t in model.params.tensors() {
        for &v in t.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(&blob, bytes).map_err(|e| ChanError::io(&blob, e))?;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        seed: model.config.seed,
        dtype: "f32le".into(),
        blob: blob.file_name().expect("file path").to_string_lossy().into_owned(),
        params: model
            .params
            .named()
            .map(|(name, t)| ParamEntry { name: name.to_string(), shape: t.shape().to_vec() })
            .collect(),
        metadata,
    };
    write_json(path, &manifest)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ChanModel, CheckpointManifest)> {
    let path = path.as_ref();
    let manifest: CheckpointManifest = read_json(path)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(ChanError::UnsupportedVersion { found: manifest.format_version, expected: CHECKPOINT_VERSION });
    }
    if manifest.dtype != "f32le" {
        return Err(ChanError::Validation(format!("unsupported checkpoint dtype `{}`", manifest.dtype)));
    }
    let expected = ChanParams::init(&manifest.config)?;
    let layout_matches = expected.len() == manifest.params.len()
        && expected.named().zip(&manifest.params).all(|((n, t), e)| n == e.name && t.shape() == e.shape.as_slice());
    if !layout_matches {
        return Err(ChanError::Validation("checkpoint parameter list does not match its config".into()));
    }
    let blob = path.parent().unwrap_or(Path::new("")).join(&manifest.blob);
    let bytes = fs::read(&blob).map_err(|e| ChanError::io(&blob, e))?;
    let want = 4 * expected.num_scalars();
    if bytes.len() != want {
        return Err(ChanError::TruncatedPayload { path: blob, expected: want, found: bytes.len() });
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    let tensors = manifest
        .params
        .iter()
        .map(|e| {
            let n = e.shape.iter().product();
            Tensor::new(e.shape.clone(), values.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ChanParams::from_tensors(&manifest.config, tensors)?;
    Ok((ChanModel { config: manifest.config.clone(), params }, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = ChanModel::new(ChanConfig::tiny()).unwrap();
        save_checkpoint(&path, &model, None).unwrap();
        let (loaded, manifest) = load_checkpoint(&path).unwrap();
        assert_eq!(manifest.blob, "model.bin");
        for (a, b) in model.params.tensors().iter().zip(loaded.params.tensors()) {
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*y, f64::from(*x as f32));
            }
        }
        // a second save of the loaded model is byte-identical
        let again = dir.path().join("again.json");
        save_checkpoint(&again, &loaded, None).unwrap();
        assert_eq!(fs::read(dir.path().join("model.bin")).unwrap(), fs::read(dir.path().join("again.bin")).unwrap());
    }

    #[test]
    fn truncated_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&path, &ChanModel::new(ChanConfig::tiny()).unwrap(), None).unwrap();
        let blob = dir.path().join("m.bin");
        let mut bytes = fs::read(&blob).unwrap();
        bytes.pop();
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ChanError::TruncatedPayload { .. })));
    }
}
