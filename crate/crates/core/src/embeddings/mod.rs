//! Pooled, layer-selectable transformer embeddings.
//!
//! A segment is cut into consecutive 10 s windows, each window is encoded by
//! an [`EmbeddingBackend`], and the frames of one layer are averaged over all
//! windows into a single `hidden_dim` vector.

mod backend;
mod precomputed;
mod stub;
mod wav2vec2;

use std::path::PathBuf;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TARGET_RATE_HZ;
use crate::error::{Error, Result};
use crate::features::{schema_hash, FeatureKind, FeatureVector, Provenance};
use crate::segmentation::Segment;

pub use backend::{EmbeddingBackend, WindowInput};
pub use precomputed::{export_precomputed, PrecomputedBackend};
pub use stub::{StubBackend, StubConfig, StubMode};
pub use wav2vec2::{Wav2Vec2Backend, Wav2Vec2Config};

/// Frames per second of the encoder output grid.
const FRAMES_PER_S: f64 = 50.0;

/// Rows a backend returns for a window of `duration_s`: floor(T / 0.02) - 1.
pub fn expected_frames(duration_s: f64) -> usize {
    (stride_units(duration_s)).saturating_sub(1)
}

fn stride_units(duration_s: f64) -> usize {
    (duration_s * FRAMES_PER_S + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_s: f64,
    pub min_tail_s: f64,
    /// Segment-relative (start_s, end_s), consecutive and non-overlapping.
    pub boundaries: Vec<(f64, f64)>,
}

impl WindowPlan {
    pub fn total_frames(&self) -> usize {
        self.boundaries.iter().map(|(s, e)| expected_frames(e - s)).sum()
    }
}

/// Consecutive windows of `window_s`, plus a final partial window when it is
/// at least `min_tail_s` long.
///
/// Window lengths are whole multiples of the 0.02 s frame stride, so the
/// encoder's frame count for each window is exact; anything after the last
/// whole stride is dropped along with too-short tails.
pub fn plan_windows(segment_duration_s: f64, window_s: f64, min_tail_s: f64) -> Result<WindowPlan> {
    if !(window_s > 0.0 && min_tail_s > 0.0 && min_tail_s <= window_s) {
        return Err(Error::Config(format!(
            "window {window_s} s / min tail {min_tail_s} s must satisfy 0 < tail <= window"
        )));
    }
    let total = stride_units(segment_duration_s);
    let per_window = stride_units(window_s).max(1);
    let min_tail = (min_tail_s * FRAMES_PER_S - 1e-9).ceil().max(1.0) as usize;
    if segment_duration_s + 1e-9 < min_tail_s || total < min_tail {
        return Err(Error::invalid(format!(
            "segment of {segment_duration_s:.3} s is shorter than the minimum window of {min_tail_s} s"
        )));
    }
    let to_s = |u: usize| u as f64 / FRAMES_PER_S;
    let mut boundaries = Vec::new();
    let mut start = 0;
    while start + per_window <= total {
        boundaries.push((to_s(start), to_s(start + per_window)));
        start += per_window;
    }
    if total - start >= min_tail {
        boundaries.push((to_s(start), to_s(total)));
    }
    Ok(WindowPlan { window_s, min_tail_s, boundaries })
}

/// Running mean over rows, kept with its row count so windows can be merged.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledWindow {
    pub mean: Vec<f64>,
    pub rows: usize,
}

/// Mean over all rows of all matrices (the mean of their concatenation).
pub fn pool_mean(matrices: &[ArrayView2<'_, f32>]) -> Result<Vec<f64>> {
    let first = matrices.first().ok_or_else(|| Error::invalid("nothing to pool"))?;
    let dim = first.ncols();
    let mut sum = vec![0.0f64; dim];
    let mut rows = 0usize;
    for m in matrices {
        if m.ncols() != dim {
            return Err(Error::invalid(format!("cannot pool {}-dim rows with {dim}-dim rows", m.ncols())));
        }
        for row in m.rows() {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v as f64;
            }
        }
        rows += m.nrows();
    }
    if rows == 0 {
        return Err(Error::invalid("nothing to pool: all matrices are empty"));
    }
    Ok(sum.into_iter().map(|s| s / rows as f64).collect())
}

/// Combines per-window means weighted by their row counts.
pub fn combine_pooled(parts: &[PooledWindow]) -> Result<PooledWindow> {
    let first = parts.first().ok_or_else(|| Error::invalid("nothing to pool"))?;
    let dim = first.mean.len();
    let rows: usize = parts.iter().map(|p| p.rows).sum();
    if rows == 0 || parts.iter().any(|p| p.mean.len() != dim) {
        return Err(Error::invalid("pooled parts are empty or differ in dimension"));
    }
    let mut mean = vec![0.0; dim];
    for p in parts {
        let w = p.rows as f64 / rows as f64;
        for (m, v) in mean.iter_mut().zip(&p.mean) {
            *m += w * v;
        }
    }
    Ok(PooledWindow { mean, rows })
}

/// Runs the backend on one window and checks the shape contract.
pub fn extract_layer_states<B: EmbeddingBackend + ?Sized>(backend: &B, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>> {
    check_input(backend, input)?;
    let states = backend.extract_window(input)?;
    if states.len() != backend.num_layers() {
        return Err(backend_error(backend, format!("returned {} layers, declared {}", states.len(), backend.num_layers())));
    }
    for m in &states {
        check_shape(backend, input, m)?;
    }
    Ok(states)
}

fn check_input<B: EmbeddingBackend + ?Sized>(backend: &B, input: &WindowInput<'_>) -> Result<()> {
    if input.sample_rate != TARGET_RATE_HZ {
        return Err(Error::invalid(format!(
            "{} expects {TARGET_RATE_HZ} Hz input, got {} Hz",
            backend.backend_id(),
            input.sample_rate
        )));
    }
    Ok(())
}

fn check_shape<B: EmbeddingBackend + ?Sized>(backend: &B, input: &WindowInput<'_>, m: &Array2<f32>) -> Result<()> {
    let n = expected_frames(input.samples.len() as f64 / input.sample_rate as f64);
    if m.dim() != (n, backend.hidden_dim()) {
        return Err(backend_error(
            backend,
            format!("window {:.2}-{:.2} s gave {:?}, expected ({n}, {})", input.start_s, input.end_s, m.dim(), backend.hidden_dim()),
        ));
    }
    Ok(())
}

fn backend_error<B: EmbeddingBackend + ?Sized>(backend: &B, message: String) -> Error {
    Error::Backend { backend: backend.backend_id().to_string(), message }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendConfig {
    Stub(StubConfig),
    /// Directory written by [`export_precomputed`].
    Precomputed { dir: PathBuf },
    /// Local directory holding `config.json` and `model.safetensors`.
    Wav2vec2 { model: PathBuf },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Stub(StubConfig::default())
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingBackend>> {
        Ok(match self {
            BackendConfig::Stub(c) => Box::new(StubBackend::new(c.clone())),
            BackendConfig::Precomputed { dir } => Box::new(PrecomputedBackend::open(dir)?),
            BackendConfig::Wav2vec2 { model } => Box::new(Wav2Vec2Backend::load(model)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub window_s: f64,
    pub min_tail_s: f64,
    pub backend: BackendConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { window_s: 10.0, min_tail_s: 1.0, backend: BackendConfig::default() }
    }
}

/// Schema id of pooled vectors for one backend layer.
pub fn embedding_schema_id(backend_id: &str, layer: usize, window_s: f64, min_tail_s: f64) -> String {
    schema_hash("emb", &format!("{backend_id}|layer={layer}|window={window_s}|min_tail={min_tail_s}"))
}

fn windows<'a>(segment: &'a Segment, plan: &WindowPlan) -> impl Iterator<Item = WindowInput<'a>> + 'a {
    let rate = segment.waveform.sample_rate;
    let boundaries = plan.boundaries.clone();
    boundaries.into_iter().map(move |(s, e)| {
        let a = (s * rate as f64).round() as usize;
        let b = ((e * rate as f64).round() as usize).min(segment.waveform.samples.len());
        WindowInput {
            samples: &segment.waveform.samples[a..b],
            sample_rate: rate,
            source: &segment.subject_id,
            start_s: segment.offset_s + s,
            end_s: segment.offset_s + e,
        }
    })
}

fn vector(segment: &Segment, values: Vec<f64>, schema_id: String, layer: usize) -> FeatureVector {
    FeatureVector {
        values,
        schema_id,
        kind: FeatureKind::Embedding,
        layer: Some(layer),
        provenance: Provenance {
            subject_id: segment.subject_id.clone(),
            segment_kind: segment.kind,
            index: segment.index,
        },
    }
}

/// One pooled vector for `layer` (1-based).
pub fn extract_embedding_vector<B: EmbeddingBackend + ?Sized>(
    segment: &Segment,
    backend: &B,
    layer: usize,
    config: &EmbeddingConfig,
) -> Result<FeatureVector> {
    backend::check_layer(backend, layer)?;
    let plan = plan_windows(segment.duration_s(), config.window_s, config.min_tail_s)?;
    let mut parts = Vec::with_capacity(plan.boundaries.len());
    for input in windows(segment, &plan) {
        check_input(backend, &input)?;
        let m = backend.extract_layer(&input, layer)?;
        check_shape(backend, &input, &m)?;
        parts.push(PooledWindow { mean: pool_mean(&[m.view()])?, rows: m.nrows() });
    }
    let pooled = combine_pooled(&parts)?;
    let schema = embedding_schema_id(backend.backend_id(), layer, config.window_s, config.min_tail_s);
    Ok(vector(segment, pooled.mean, schema, layer))
}

/// Pooled vectors for every layer, index `l - 1` holding layer `l`.
pub fn extract_all_layers<B: EmbeddingBackend + ?Sized>(
    segment: &Segment,
    backend: &B,
    config: &EmbeddingConfig,
) -> Result<Vec<FeatureVector>> {
    let plan = plan_windows(segment.duration_s(), config.window_s, config.min_tail_s)?;
    let mut per_layer: Vec<Vec<PooledWindow>> = vec![Vec::new(); backend.num_layers()];
    for input in windows(segment, &plan) {
        for (l, m) in extract_layer_states(backend, &input)?.into_iter().enumerate() {
            per_layer[l].push(PooledWindow { mean: pool_mean(&[m.view()])?, rows: m.nrows() });
        }
    }
    per_layer
        .into_iter()
        .enumerate()
        .map(|(i, parts)| {
            let layer = i + 1;
            let schema = embedding_schema_id(backend.backend_id(), layer, config.window_s, config.min_tail_s);
            Ok(vector(segment, combine_pooled(&parts)?.mean, schema, layer))
        })
        .collect()
}

/// [`extract_all_layers`] over many segments; parallel only for shareable backends.
pub fn extract_all_layers_batch<B: EmbeddingBackend + ?Sized>(
    segments: &[Segment],
    backend: &B,
    config: &EmbeddingConfig,
) -> Result<Vec<Vec<FeatureVector>>> {
    if backend.shareable() {
        segments.par_iter().map(|s| extract_all_layers(s, backend, config)).collect()
    } else {
        segments.iter().map(|s| extract_all_layers(s, backend, config)).collect()
    }
}
