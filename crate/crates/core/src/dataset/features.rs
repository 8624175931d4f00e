//! Shot feature matrices and the `CHF1` binary format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size      field
//! 0       4         magic "CHF1"
//! 4       4         n_shots (u32)
//! 8       4         dim (u32)
//! 12      4·n·dim   f32 values, row-major by shot
//! ```

use std::fs;
use std::path::Path;

use crate::error::{ChanError, Result};
use crate::tensor::Tensor;

pub const FEATURE_MAGIC: [u8; 4] = *b"CHF1";
const HEADER_LEN: usize = 12;

/// Per-video matrix of shot feature vectors, `n_shots × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotFeatureSequence {
    n_shots: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ShotFeatureSequence {
    pub fn new(n_shots: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n_shots == 0 || dim == 0 {
            return Err(ChanError::invalid("features", "shot count and dimension must be positive"));
        }
        if data.len() != n_shots * dim {
            return Err(ChanError::shape("features", &[n_shots, dim], &[data.len()]));
        }
        Ok(ShotFeatureSequence { n_shots, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ChanError::invalid("features", "ragged rows"));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows `start..start + len` as a `[len × dim]` tensor.
    pub fn rows_tensor(&self, start: usize, len: usize) -> Tensor {
        let data = self.data[start * self.dim..(start + len) * self.dim].to_vec();
        Tensor::matrix(len, self.dim, data).expect("range within sequence")
    }

    /// Values narrowed to f32, as written to disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&(self.n_shots as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(ChanError::TruncatedPayload {
                path: path.to_path_buf(),
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic[..3] == FEATURE_MAGIC[..3] && magic[3].is_ascii_digit() && magic != FEATURE_MAGIC {
            return Err(ChanError::UnsupportedVersion {
                found: u32::from(magic[3] - b'0'),
                expected: 1,
            });
        }
        if magic != FEATURE_MAGIC {
            return Err(ChanError::BadMagic { path: path.to_path_buf(), found: magic });
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let expected = HEADER_LEN + 4 * n * dim;
        if bytes.len() < expected {
            return Err(ChanError::TruncatedPayload {
                path: path.to_path_buf(),
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(ChanError::Validation(format!(
                "{}: {} trailing bytes after payload",
                path.display(),
                bytes.len() - expected
            )));
        }
        let mut data = Vec::with_capacity(n * dim);
        for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(ChanError::NonFinite {
                    path: path.to_path_buf(),
                    shot: i / dim,
                    dim: i % dim,
                });
            }
            data.push(f64::from(v));
        }
        Self::new(n, dim, data)
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<ShotFeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ChanError::io(path, e))?;
    ShotFeatureSequence::from_bytes(&bytes, path)
}

pub fn save_features(path: impl AsRef<Path>, features: &ShotFeatureSequence) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, features.to_bytes()).map_err(|e| ChanError::io(path, e))
}
