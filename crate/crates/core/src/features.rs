//! Fixed-length feature vectors and their on-disk matrix store.
//!
//! A store is a row-major little-endian float32 matrix (`{name}.f32`) with a
//! JSON sidecar (`{name}.json`) holding the schema id, extractor config and
//! one provenance entry per row.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Functionals,
    Embedding,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Functionals => "functionals",
            FeatureKind::Embedding => "embedding",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functionals" => Ok(FeatureKind::Functionals),
            "embedding" => Ok(FeatureKind::Embedding),
            other => Err(Error::invalid(format!("unknown feature kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

/// Which segment a feature row came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub subject_id: String,
    pub segment_kind: Task,
    pub index: usize,
}

impl Provenance {
    pub fn sample_id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.segment_kind, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: String,
    pub kind: FeatureKind,
    /// Embedding layer (1-based) for embedding vectors.
    pub layer: Option<usize>,
    pub provenance: Provenance,
}

/// Short content hash used for schema ids.
pub fn schema_hash(prefix: &str, canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{prefix}-{hex}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSidecar {
    pub schema_id: String,
    pub kind: FeatureKind,
    pub layer: Option<usize>,
    pub dim: usize,
    pub extractor_config: serde_json::Value,
    pub rows: Vec<Provenance>,
}

/// Rows of equal-schema feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub sidecar: StoreSidecar,
    pub data: Vec<f32>,
}

impl FeatureStore {
    pub fn from_vectors(vectors: &[FeatureVector], extractor_config: serde_json::Value) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::invalid("feature store needs at least one vector"))?;
        let dim = first.values.len();
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.schema_id != first.schema_id || v.values.len() != dim {
                return Err(Error::invalid(format!(
                    "cannot mix schemas {} and {} in one matrix",
                    first.schema_id, v.schema_id
                )));
            }
            if v.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite feature in {}", v.provenance.sample_id())));
            }
            data.extend(v.values.iter().map(|&x| x as f32));
        }
        Ok(Self {
            sidecar: StoreSidecar {
                schema_id: first.schema_id.clone(),
                kind: first.kind,
                layer: first.layer,
                dim,
                extractor_config,
                rows: vectors.iter().map(|v| v.provenance.clone()).collect(),
            },
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.sidecar.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sidecar.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.sidecar.dim;
        &self.data[i * d..(i + 1) * d]
    }

    /// Rows back as feature vectors (values widened from f32).
    pub fn to_vectors(&self) -> Vec<FeatureVector> {
        self.sidecar
            .rows
            .iter()
            .enumerate()
            .map(|(i, p)| FeatureVector {
                values: self.row(i).iter().map(|&v| v as f64).collect(),
                schema_id: self.sidecar.schema_id.clone(),
                kind: self.sidecar.kind,
                layer: self.sidecar.layer,
                provenance: p.clone(),
            })
            .collect()
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bin = dir.join(format!("{name}.f32"));
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let json = dir.join(format!("{name}.json"));
        fs::write(&json, serde_json::to_vec_pretty(&self.sidecar)?).map_err(|e| Error::io(&json, e))
    }

    pub fn read(dir: &Path, name: &str) -> Result<Self> {
        let json = dir.join(format!("{name}.json"));
        let sidecar: StoreSidecar =
            serde_json::from_slice(&fs::read(&json).map_err(|e| Error::io(&json, e))?)?;
        let bin = dir.join(format!("{name}.f32"));
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != 4 * sidecar.dim * sidecar.rows.len() {
            return Err(Error::invalid(format!(
                "{}: {} bytes, expected {} rows x {} float32",
                bin.display(),
                bytes.len(),
                sidecar.rows.len(),
                sidecar.dim
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { sidecar, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(id: &str, values: Vec<f64>, schema: &str) -> FeatureVector {
        FeatureVector {
            values,
            schema_id: schema.into(),
            kind: FeatureKind::Functionals,
            layer: None,
            provenance: Provenance {
                subject_id: id.into(),
                segment_kind: Task::Skt3,
                index: 0,
            },
        }
    }

    #[test]
    fn store_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeatureStore::from_vectors(
            &[vector("A", vec![1.0, -2.5, 3.25], "x"), vector("B", vec![0.0, 1e-3, 7.0], "x")],
            serde_json::json!({"k": 1}),
        )
        .unwrap();
        store.write(dir.path(), "feat").unwrap();
        let back = FeatureStore::read(dir.path(), "feat").unwrap();
        assert_eq!(back, store);
        assert_eq!(back.row(1), &[0.0, 1e-3, 7.0]);
    }

    #[test]
    fn mixed_schemas_are_rejected() {
        let err = FeatureStore::from_vectors(
            &[vector("A", vec![1.0], "x"), vector("B", vec![1.0], "y")],
            serde_json::Value::Null,
        );
        assert!(err.is_err());
    }

    #[test]
    fn schema_hash_is_stable() {
        assert_eq!(schema_hash("fn", "abc"), "fn-ba7816bf8f01cfea");
    }
}
