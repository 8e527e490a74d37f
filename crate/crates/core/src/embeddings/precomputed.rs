//! File-backed embedding states.
//!
//! Layout under the store root:
//!
//! ```text
//! backend.json                      backend_id, hidden_dim, num_layers, frame_stride_s
//! {recording}/layer_{LL}.f32        all windows' frames, row-major float32 LE
//! {recording}/layer_{LL}.json       layer, backend_id, per-window row ranges
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::backend::{check_layer, EmbeddingBackend, WindowInput};
use super::{extract_layer_states, plan_windows, windows, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::segmentation::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreHeader {
    backend_id: String,
    hidden_dim: usize,
    num_layers: usize,
    frame_stride_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WindowEntry {
    start_s: f64,
    end_s: f64,
    row_start: usize,
    rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerSidecar {
    layer: usize,
    backend_id: String,
    hidden_dim: usize,
    windows: Vec<WindowEntry>,
}

/// Bounds are compared at this resolution, far below the 0.02 s stride.
const BOUND_TOL_S: f64 = 1e-4;

#[derive(Debug)]
pub struct PrecomputedBackend {
    root: PathBuf,
    header: StoreHeader,
}

impl PrecomputedBackend {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join("backend.json");
        let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { root: root.to_path_buf(), header: serde_json::from_slice(&text)? })
    }

    fn layer_paths(&self, source: &str, layer: usize) -> (PathBuf, PathBuf) {
        let dir = self.root.join(source);
        (dir.join(format!("layer_{layer:02}.f32")), dir.join(format!("layer_{layer:02}.json")))
    }

    fn error(&self, message: String) -> Error {
        Error::Backend { backend: self.header.backend_id.clone(), message }
    }
}

impl EmbeddingBackend for PrecomputedBackend {
    fn backend_id(&self) -> &str {
        &self.header.backend_id
    }

    fn hidden_dim(&self) -> usize {
        self.header.hidden_dim
    }

    fn num_layers(&self) -> usize {
        self.header.num_layers
    }

    fn frame_stride_s(&self) -> f64 {
        self.header.frame_stride_s
    }

    fn extract_window(&self, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>> {
        (1..=self.num_layers()).map(|l| self.extract_layer(input, l)).collect()
    }

    fn extract_layer(&self, input: &WindowInput<'_>, layer: usize) -> Result<Array2<f32>> {
        check_layer(self, layer)?;
        let (bin, json) = self.layer_paths(input.source, layer);
        let sidecar: LayerSidecar =
            serde_json::from_slice(&fs::read(&json).map_err(|e| Error::io(&json, e))?)?;
        let entry = sidecar
            .windows
            .iter()
            .find(|w| (w.start_s - input.start_s).abs() < BOUND_TOL_S && (w.end_s - input.end_s).abs() < BOUND_TOL_S)
            .ok_or_else(|| {
                self.error(format!(
                    "no stored window {:.2}-{:.2} s for {} layer {layer}",
                    input.start_s, input.end_s, input.source
                ))
            })?;
        let d = self.header.hidden_dim;
        let mut file = File::open(&bin).map_err(|e| Error::io(&bin, e))?;
        file.seek(SeekFrom::Start((entry.row_start * d * 4) as u64))
            .map_err(|e| Error::io(&bin, e))?;
        let mut bytes = vec![0u8; entry.rows * d * 4];
        file.read_exact(&mut bytes).map_err(|e| Error::io(&bin, e))?;
        let data: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Array2::from_shape_vec((entry.rows, d), data).map_err(|e| self.error(e.to_string()))
    }
}

/// Runs `backend` over the planned windows of every segment and stores all
/// layers, one directory per recording (subject).
pub fn export_precomputed<B: EmbeddingBackend + ?Sized>(
    root: &Path,
    backend: &B,
    segments: &[Segment],
    config: &EmbeddingConfig,
) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let header = StoreHeader {
        backend_id: backend.backend_id().to_string(),
        hidden_dim: backend.hidden_dim(),
        num_layers: backend.num_layers(),
        frame_stride_s: backend.frame_stride_s(),
    };
    let header_path = root.join("backend.json");
    fs::write(&header_path, serde_json::to_vec_pretty(&header)?).map_err(|e| Error::io(&header_path, e))?;

    let mut by_source: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        by_source.entry(s.subject_id.as_str()).or_default().push(s);
    }
    for (source, segs) in by_source {
        let mut data: Vec<Vec<u8>> = vec![Vec::new(); header.num_layers];
        let mut entries: Vec<WindowEntry> = Vec::new();
        let mut row = 0;
        for seg in segs {
            let plan = plan_windows(seg.duration_s(), config.window_s, config.min_tail_s)?;
            for input in windows(seg, &plan) {
                let states = extract_layer_states(backend, &input)?;
                let rows = states[0].nrows();
                entries.push(WindowEntry { start_s: input.start_s, end_s: input.end_s, row_start: row, rows });
                row += rows;
                for (buf, m) in data.iter_mut().zip(&states) {
                    buf.extend(m.iter().flat_map(|v| v.to_le_bytes()));
                }
            }
        }
        let dir = root.join(source);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (i, buf) in data.into_iter().enumerate() {
            let layer = i + 1;
            let bin = dir.join(format!("layer_{layer:02}.f32"));
            fs::write(&bin, buf).map_err(|e| Error::io(&bin, e))?;
            let sidecar = LayerSidecar {
                layer,
                backend_id: header.backend_id.clone(),
                hidden_dim: header.hidden_dim,
                windows: entries.clone(),
            };
            let json = dir.join(format!("layer_{layer:02}.json"));
            fs::write(&json, serde_json::to_vec_pretty(&sidecar)?).map_err(|e| Error::io(&json, e))?;
        }
    }
    Ok(())
}
