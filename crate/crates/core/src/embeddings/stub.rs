//! Deterministic stand-in for a neural encoder.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{check_layer, EmbeddingBackend, WindowInput};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StubMode {
    /// Every entry of layer `l` equals `l`.
    Constant,
    /// Layer `layer` carries `gain * log10(frame RMS)` on every dimension
    /// plus noise; all other layers carry noise only.
    Signal { layer: usize, gain: f64, noise_sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    #[serde(flatten)]
    pub mode: StubMode,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self { hidden_dim: 768, num_layers: 12, mode: StubMode::Constant }
    }
}

#[derive(Debug, Clone)]
pub struct StubBackend {
    config: StubConfig,
    id: String,
}

/// Samples per output frame and receptive field, matching a 16 kHz conv front end.
const HOP: usize = 320;
const FIELD: usize = 400;

impl StubBackend {
    pub fn new(config: StubConfig) -> Self {
        let id = match &config.mode {
            StubMode::Constant => format!("stub-constant-{}x{}", config.num_layers, config.hidden_dim),
            StubMode::Signal { layer, gain, noise_sd } => format!(
                "stub-signal-l{layer}-g{gain}-n{noise_sd}-{}x{}",
                config.num_layers, config.hidden_dim
            ),
        };
        Self { config, id }
    }

    pub fn constant(hidden_dim: usize, num_layers: usize) -> Self {
        Self::new(StubConfig { hidden_dim, num_layers, mode: StubMode::Constant })
    }

    pub fn signal(hidden_dim: usize, num_layers: usize, layer: usize) -> Self {
        Self::new(StubConfig {
            hidden_dim,
            num_layers,
            mode: StubMode::Signal { layer, gain: 1.0, noise_sd: 0.5 },
        })
    }

    fn rows(samples: &[f32]) -> usize {
        (samples.len() / HOP).saturating_sub(1)
    }

    fn layer_matrix(&self, input: &WindowInput<'_>, layer: usize) -> Array2<f32> {
        let n = Self::rows(input.samples);
        let d = self.config.hidden_dim;
        match &self.config.mode {
            StubMode::Constant => Array2::from_elem((n, d), layer as f32),
            StubMode::Signal { layer: signal_layer, gain, noise_sd } => {
                let mut rng = ChaCha8Rng::seed_from_u64(content_seed(input.samples, layer));
                let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("finite noise sd");
                let mut m = Array2::from_shape_fn((n, d), |_| noise.sample(&mut rng) as f32);
                if layer == *signal_layer {
                    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
                        let frame = &input.samples[i * HOP..(i * HOP + FIELD).min(input.samples.len())];
                        let power = frame.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / frame.len() as f64;
                        let level = (gain * 0.5 * power.max(1e-10).log10()) as f32;
                        row.mapv_inplace(|v| v + level);
                    }
                }
                m
            }
        }
    }
}

fn content_seed(samples: &[f32], layer: usize) -> u64 {
    let mut h = Sha256::new();
    h.update((layer as u64).to_le_bytes());
    for s in samples {
        h.update(s.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl EmbeddingBackend for StubBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    fn num_layers(&self) -> usize {
        self.config.num_layers
    }

    fn extract_window(&self, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>> {
        Ok((1..=self.config.num_layers).map(|l| self.layer_matrix(input, l)).collect())
    }

    fn extract_layer(&self, input: &WindowInput<'_>, layer: usize) -> Result<Array2<f32>> {
        check_layer(self, layer)?;
        Ok(self.layer_matrix(input, layer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(samples: &[f32]) -> WindowInput<'_> {
        WindowInput { samples, sample_rate: 16_000, source: "s", start_s: 0.0, end_s: samples.len() as f64 / 16e3 }
    }

    #[test]
    fn constant_layers_hold_their_index() {
        let b = StubBackend::constant(8, 12);
        let x = vec![0.1f32; 16_000];
        let states = b.extract_window(&input(&x)).unwrap();
        assert_eq!(states.len(), 12);
        for (i, m) in states.iter().enumerate() {
            assert_eq!(m.dim(), (49, 8));
            assert!(m.iter().all(|&v| v == (i + 1) as f32));
        }
        assert!(b.extract_layer(&input(&x), 13).is_err());
        assert!(b.extract_layer(&input(&x), 0).is_err());
    }

    #[test]
    fn signal_mode_is_deterministic_and_localized() {
        let b = StubBackend::signal(4, 12, 8);
        let loud = vec![0.5f32; 8_000];
        let quiet = vec![0.005f32; 8_000];
        assert_eq!(b.extract_layer(&input(&loud), 8).unwrap(), b.extract_layer(&input(&loud), 8).unwrap());
        let mean = |m: Array2<f32>| m.mean().unwrap();
        let gap8 = mean(b.extract_layer(&input(&loud), 8).unwrap()) - mean(b.extract_layer(&input(&quiet), 8).unwrap());
        let gap3 = mean(b.extract_layer(&input(&loud), 3).unwrap()) - mean(b.extract_layer(&input(&quiet), 3).unwrap());
        assert!((gap8 - 2.0).abs() < 0.2, "{gap8}");
        assert!(gap3.abs() < 0.2, "{gap3}");
    }
}
