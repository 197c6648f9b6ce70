//! Weight files: a JSON manifest mapping tensor names to shape and byte
//! offset, next to a raw little-endian `f32` blob.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    /// Blob file name, relative to the manifest.
    blob: String,
    tensors: BTreeMap<String, WeightEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    entries: BTreeMap<String, WeightEntry>,
    blob: Vec<u8>,
}

impl WeightStore {
    /// Pack named tensors back to back in the given order.
    pub fn from_tensors<'a, I>(tensors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a [usize], &'a [f32])>,
    {
        let mut entries = BTreeMap::new();
        let mut blob = Vec::new();
        for (name, shape, data) in tensors {
            if shape.iter().product::<usize>() != data.len() {
                return Err(Error::Shape(format!(
                    "tensor `{name}` has {} values for shape {shape:?}",
                    data.len()
                )));
            }
            let entry = WeightEntry {
                shape: shape.to_vec(),
                offset: blob.len() as u64,
            };
            if entries.insert(name.to_string(), entry).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate tensor name `{name}`")));
            }
            for v in data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(WeightStore { entries, blob })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entry(&self, name: &str) -> Option<&WeightEntry> {
        self.entries.get(name)
    }

    /// Decoded values of one tensor.
    pub fn values(&self, name: &str) -> Option<Vec<f32>> {
        let e = self.entries.get(name)?;
        let start = e.offset as usize;
        let len = e.shape.iter().product::<usize>();
        Some(
            self.blob[start..start + 4 * len]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        )
    }

    fn blob_path(manifest: &Path) -> PathBuf {
        manifest.with_extension("bin")
    }

    /// Writes `<path>` (manifest) and `<path>.bin` (blob, extension replaced).
    pub fn save(&self, manifest_path: impl AsRef<Path>) -> Result<()> {
        let manifest_path = manifest_path.as_ref();
        let blob_path = Self::blob_path(manifest_path);
        let manifest = Manifest {
            blob: blob_path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::InvalidArgument(format!("bad weight path {manifest_path:?}")))?
                .to_string(),
            tensors: self.entries.clone(),
        };
        std::fs::write(&blob_path, &self.blob).map_err(|e| Error::io(&blob_path, e))?;
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text =
            std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let blob_path = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&manifest.blob);
        let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        Self::from_parts(manifest.tensors, blob)
    }

    fn from_parts(entries: BTreeMap<String, WeightEntry>, blob: Vec<u8>) -> Result<Self> {
        let blob_len = blob.len() as u64;
        let mut described = 0u64;
        for (name, e) in &entries {
            let bytes = e
                .shape
                .iter()
                .try_fold(4u64, |acc, &d| acc.checked_mul(d as u64))
                .ok_or_else(|| Error::OffsetOverflow(name.clone()))?;
            let end = e
                .offset
                .checked_add(bytes)
                .ok_or_else(|| Error::OffsetOverflow(name.clone()))?;
            if end > blob_len {
                return Err(Error::Truncated {
                    layer: name.clone(),
                    start: e.offset,
                    end,
                    len: blob_len,
                });
            }
            described = described
                .checked_add(bytes)
                .ok_or_else(|| Error::OffsetOverflow(name.clone()))?;
        }
        if described != blob_len {
            return Err(Error::InvalidArgument(format!(
                "weight blob has {blob_len} bytes but the manifest describes {described}"
            )));
        }
        Ok(WeightStore { entries, blob })
    }
}
