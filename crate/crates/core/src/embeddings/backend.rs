use ndarray::Array2;

use crate::error::{Error, Result};

/// One analysis window handed to a backend.
#[derive(Debug, Clone, Copy)]
pub struct WindowInput<'a> {
    pub samples: &'a [f32],
    pub sample_rate: u32,
    /// Recording key, used by file-backed backends to locate stored states.
    pub source: &'a str,
    /// Absolute window bounds within the recording, seconds.
    pub start_s: f64,
    pub end_s: f64,
}

/// Layer-resolved frame embeddings from a pretrained speech encoder.
///
/// Layers are 1-based; `extract_window(..)[l - 1]` is layer `l`. Each matrix
/// has `floor(T / frame_stride_s) - 1` rows of `hidden_dim` columns.
/// Implementations must be deterministic.
pub trait EmbeddingBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn hidden_dim(&self) -> usize;
    fn num_layers(&self) -> usize;

    fn frame_stride_s(&self) -> f64 {
        0.02
    }

    /// Whether concurrent calls are allowed.
    fn shareable(&self) -> bool {
        true
    }

    fn extract_window(&self, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>>;

    fn extract_layer(&self, input: &WindowInput<'_>, layer: usize) -> Result<Array2<f32>> {
        check_layer(self, layer)?;
        Ok(self.extract_window(input)?.swap_remove(layer - 1))
    }
}

pub(crate) fn check_layer<B: EmbeddingBackend + ?Sized>(backend: &B, layer: usize) -> Result<()> {
    if layer == 0 || layer > backend.num_layers() {
        return Err(Error::invalid(format!(
            "layer {layer} outside 1..={} for backend {}",
            backend.num_layers(),
            backend.backend_id()
        )));
    }
    Ok(())
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for Box<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn hidden_dim(&self) -> usize {
        (**self).hidden_dim()
    }
    fn num_layers(&self) -> usize {
        (**self).num_layers()
    }
    fn frame_stride_s(&self) -> f64 {
        (**self).frame_stride_s()
    }
    fn shareable(&self) -> bool {
        (**self).shareable()
    }
    fn extract_window(&self, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>> {
        (**self).extract_window(input)
    }
    fn extract_layer(&self, input: &WindowInput<'_>, layer: usize) -> Result<Array2<f32>> {
        (**self).extract_layer(input, layer)
    }
}
