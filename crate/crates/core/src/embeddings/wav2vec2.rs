//! wav2vec 2.0 encoder inference on CPU from Hugging Face safetensors weights.
//!
//! Supports both published layouts: the base models (group norm in the first
//! conv block, post-norm transformer) and the large "stable layer norm"
//! models. Hidden state `l` is the output of transformer block `l`, matching
//! `hidden_states[l]` of the reference implementation.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use safetensors::tensor::{Dtype, SafeTensors};
use serde::Deserialize;

use super::backend::{check_layer, EmbeddingBackend, WindowInput};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Wav2Vec2Config {
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub conv_dim: Vec<usize>,
    pub conv_kernel: Vec<usize>,
    pub conv_stride: Vec<usize>,
    #[serde(default)]
    pub conv_bias: bool,
    #[serde(default = "default_norm")]
    pub feat_extract_norm: String,
    #[serde(default)]
    pub do_stable_layer_norm: bool,
    pub num_conv_pos_embeddings: usize,
    pub num_conv_pos_embedding_groups: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
    #[serde(default = "default_act")]
    pub feat_extract_activation: String,
}

fn default_norm() -> String {
    "group".into()
}
fn default_eps() -> f64 {
    1e-5
}
fn default_act() -> String {
    "gelu".into()
}

#[derive(Debug, Deserialize)]
struct PreprocessorConfig {
    #[serde(default)]
    do_normalize: bool,
}

struct Linear {
    /// (in, out), pre-transposed.
    w: Array2<f32>,
    b: Option<Array1<f32>>,
}

impl Linear {
    fn forward(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut y = x.dot(&self.w);
        if let Some(b) = &self.b {
            y += b;
        }
        y
    }
}

struct Norm {
    gamma: Array1<f32>,
    beta: Array1<f32>,
    eps: f32,
}

impl Norm {
    /// Normalizes every row of `x` over its columns.
    fn rows(&self, x: &mut Array2<f32>) {
        for mut row in x.rows_mut() {
            let n = row.len() as f32;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let inv = 1.0 / (var + self.eps).sqrt();
            Zip::from(&mut row).and(&self.gamma).and(&self.beta).for_each(|v, g, b| *v = (*v - mean) * inv * g + b);
        }
    }

    /// Normalizes every column of `x` (one channel over time).
    fn columns(&self, x: &mut Array2<f32>) {
        for (c, mut col) in x.columns_mut().into_iter().enumerate() {
            let n = col.len() as f32;
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let inv = 1.0 / (var + self.eps).sqrt();
            let (g, b) = (self.gamma[c], self.beta[c]);
            col.mapv_inplace(|v| (v - mean) * inv * g + b);
        }
    }
}

enum ConvNorm {
    None,
    Group(Norm),
    Layer(Norm),
}

struct ConvBlock {
    /// (in * kernel, out) with row index `c * kernel + k`.
    w: Array2<f32>,
    b: Option<Array1<f32>>,
    kernel: usize,
    stride: usize,
    norm: ConvNorm,
}

/// Output rows computed per im2col chunk; bounds the patch matrix size.
const CHUNK: usize = 2048;

impl ConvBlock {
    /// `x` is (time, channels).
    fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let (t_in, c_in) = x.dim();
        let t_out = if t_in < self.kernel { 0 } else { (t_in - self.kernel) / self.stride + 1 };
        let mut y = Array2::<f32>::zeros((t_out, self.w.ncols()));
        let mut start = 0;
        while start < t_out {
            let end = (start + CHUNK).min(t_out);
            let mut patches = Array2::<f32>::zeros((end - start, c_in * self.kernel));
            for (r, mut p) in patches.rows_mut().into_iter().enumerate() {
                let t0 = (start + r) * self.stride;
                for c in 0..c_in {
                    for k in 0..self.kernel {
                        p[c * self.kernel + k] = x[[t0 + k, c]];
                    }
                }
            }
            y.slice_mut(s![start..end, ..]).assign(&patches.dot(&self.w));
            start = end;
        }
        if let Some(b) = &self.b {
            y += b;
        }
        match &self.norm {
            ConvNorm::None => {}
            ConvNorm::Group(n) => n.columns(&mut y),
            ConvNorm::Layer(n) => n.rows(&mut y),
        }
        y.mapv_inplace(gelu);
        y
    }
}

/// Grouped "same" convolution over time with an even or odd kernel.
struct PosConv {
    /// Per group: (in_per_group * kernel, out_per_group).
    w: Vec<Array2<f32>>,
    b: Array1<f32>,
    kernel: usize,
}

impl PosConv {
    fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let (t, h) = x.dim();
        let groups = self.w.len();
        let cg = h / groups;
        let pad = self.kernel / 2;
        let mut y = Array2::<f32>::zeros((t, h));
        for (g, w) in self.w.iter().enumerate() {
            let mut patches = Array2::<f32>::zeros((t, cg * self.kernel));
            for (r, mut p) in patches.rows_mut().into_iter().enumerate() {
                for k in 0..self.kernel {
                    let src = r + k;
                    if src < pad || src - pad >= t {
                        continue;
                    }
                    for c in 0..cg {
                        p[c * self.kernel + k] = x[[src - pad, g * cg + c]];
                    }
                }
            }
            y.slice_mut(s![.., g * cg..(g + 1) * cg]).assign(&patches.dot(w));
        }
        y += &self.b;
        y.mapv_inplace(gelu);
        y
    }
}

struct Block {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    attn_norm: Norm,
    ff_in: Linear,
    ff_out: Linear,
    ff_norm: Norm,
}

impl Block {
    fn attention(&self, x: ArrayView2<'_, f32>, heads: usize) -> Array2<f32> {
        let (t, h) = x.dim();
        let hd = h / heads;
        let scale = (hd as f32).powf(-0.5);
        let q = self.q.forward(x) * scale;
        let k = self.k.forward(x);
        let v = self.v.forward(x);
        let mut ctx = Array2::<f32>::zeros((t, h));
        for head in 0..heads {
            let cols = s![.., head * hd..(head + 1) * hd];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t());
            for mut row in scores.rows_mut() {
                let max = row.fold(f32::NEG_INFINITY, |a, &b| a.max(b));
                row.mapv_inplace(|s| (s - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|s| s / sum);
            }
            ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        }
        self.out.forward(ctx.view())
    }

    fn feed_forward(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut mid = self.ff_in.forward(x);
        mid.mapv_inplace(gelu);
        self.ff_out.forward(mid.view())
    }

    fn forward(&self, x: Array2<f32>, heads: usize, stable: bool) -> Array2<f32> {
        if stable {
            let mut normed = x.clone();
            self.attn_norm.rows(&mut normed);
            let mut h = x + self.attention(normed.view(), heads);
            let mut normed = h.clone();
            self.ff_norm.rows(&mut normed);
            h += &self.feed_forward(normed.view());
            h
        } else {
            let mut h = &x + &self.attention(x.view(), heads);
            self.attn_norm.rows(&mut h);
            h = &h + &self.feed_forward(h.view());
            self.ff_norm.rows(&mut h);
            h
        }
    }
}

fn gelu(x: f32) -> f32 {
    (0.5 * x as f64 * (1.0 + libm::erf(x as f64 / std::f64::consts::SQRT_2))) as f32
}

struct Weights<'a> {
    tensors: SafeTensors<'a>,
    prefix: &'static str,
}

impl Weights<'_> {
    fn has(&self, name: &str) -> bool {
        self.tensors.tensor(&format!("{}{name}", self.prefix)).is_ok()
    }

    fn get(&self, name: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        let full = format!("{}{name}", self.prefix);
        let t = self
            .tensors
            .tensor(&full)
            .map_err(|_| Error::Backend { backend: "wav2vec2".into(), message: format!("missing tensor {full}") })?;
        let bytes = t.data();
        let data: Vec<f32> = match t.dtype() {
            Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
            Dtype::F16 => bytes.chunks_exact(2).map(|c| f16_to_f32(u16::from_le_bytes([c[0], c[1]]))).collect(),
            Dtype::BF16 => bytes
                .chunks_exact(2)
                .map(|c| f32::from_bits((u16::from_le_bytes([c[0], c[1]]) as u32) << 16))
                .collect(),
            other => {
                return Err(Error::Backend { backend: "wav2vec2".into(), message: format!("{full}: unsupported dtype {other:?}") })
            }
        };
        Ok((t.shape().to_vec(), data))
    }

    fn vector(&self, name: &str) -> Result<Array1<f32>> {
        Ok(Array1::from_vec(self.get(name)?.1))
    }

    fn linear(&self, name: &str) -> Result<Linear> {
        let (shape, data) = self.get(&format!("{name}.weight"))?;
        let w = Array2::from_shape_vec((shape[0], shape[1]), data).map_err(shape_err)?;
        let b = if self.has(&format!("{name}.bias")) { Some(self.vector(&format!("{name}.bias"))?) } else { None };
        Ok(Linear { w: w.reversed_axes().as_standard_layout().to_owned(), b })
    }

    fn norm(&self, name: &str, eps: f64) -> Result<Norm> {
        Ok(Norm { gamma: self.vector(&format!("{name}.weight"))?, beta: self.vector(&format!("{name}.bias"))?, eps: eps as f32 })
    }
}

fn shape_err(e: ndarray::ShapeError) -> Error {
    Error::Backend { backend: "wav2vec2".into(), message: e.to_string() }
}

fn f16_to_f32(h: u16) -> f32 {
    let sign = ((h >> 15) as u32) << 31;
    let exp = ((h >> 10) & 0x1f) as u32;
    let mant = (h & 0x3ff) as u32;
    match exp {
        0 => {
            let v = mant as f32 * 2f32.powi(-24);
            if sign != 0 {
                -v
            } else {
                v
            }
        }
        31 => f32::from_bits(sign | 0x7f80_0000 | (mant << 13)),
        _ => f32::from_bits(sign | ((exp + 112) << 23) | (mant << 13)),
    }
}

/// Conv weight (out, in, k) as an im2col matrix (in * k, out).
fn conv_matrix(shape: &[usize], data: Vec<f32>) -> Result<Array2<f32>> {
    let (out, rest) = (shape[0], shape[1] * shape[2]);
    Ok(Array2::from_shape_vec((out, rest), data).map_err(shape_err)?.reversed_axes().as_standard_layout().to_owned())
}

pub struct Wav2Vec2Backend {
    id: String,
    config: Wav2Vec2Config,
    normalize_input: bool,
    convs: Vec<ConvBlock>,
    proj_norm: Norm,
    projection: Linear,
    pos_conv: PosConv,
    encoder_norm: Norm,
    blocks: Vec<Block>,
}

impl std::fmt::Debug for Wav2Vec2Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wav2Vec2Backend").field("id", &self.id).field("config", &self.config).finish()
    }
}

impl Wav2Vec2Backend {
    /// Loads `config.json` and `model.safetensors` from `model_dir`.
    /// Input is standardized per window when `preprocessor_config.json`
    /// says `do_normalize`.
    pub fn load(model_dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = model_dir.join(name);
            fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let config: Wav2Vec2Config = serde_json::from_slice(&read("config.json")?)?;
        let normalize_input = match fs::read(model_dir.join("preprocessor_config.json")) {
            Ok(bytes) => serde_json::from_slice::<PreprocessorConfig>(&bytes)?.do_normalize,
            Err(_) => false,
        };
        let bytes = read("model.safetensors")?;
        let tensors = SafeTensors::deserialize(&bytes)
            .map_err(|e| Error::Backend { backend: "wav2vec2".into(), message: e.to_string() })?;
        let name = model_dir.file_name().map_or("model".into(), |n| n.to_string_lossy().into_owned());
        Self::from_tensors(format!("wav2vec2:{name}"), config, tensors, normalize_input)
    }

    fn from_tensors(id: String, config: Wav2Vec2Config, tensors: SafeTensors<'_>, normalize_input: bool) -> Result<Self> {
        if config.hidden_act != "gelu" || config.feat_extract_activation != "gelu" {
            return Err(Error::Config("only gelu activations are supported".into()));
        }
        let prefix = if tensors.tensor("feature_projection.projection.weight").is_ok() { "" } else { "wav2vec2." };
        let w = Weights { tensors, prefix };
        let eps = config.layer_norm_eps;
        let layer_norm_convs = config.feat_extract_norm == "layer";

        let mut convs = Vec::new();
        for i in 0..config.conv_dim.len() {
            let base = format!("feature_extractor.conv_layers.{i}");
            let (shape, data) = w.get(&format!("{base}.conv.weight"))?;
            let norm = if layer_norm_convs {
                ConvNorm::Layer(w.norm(&format!("{base}.layer_norm"), 1e-5)?)
            } else if i == 0 {
                ConvNorm::Group(w.norm(&format!("{base}.layer_norm"), 1e-5)?)
            } else {
                ConvNorm::None
            };
            convs.push(ConvBlock {
                w: conv_matrix(&shape, data)?,
                b: if config.conv_bias { Some(w.vector(&format!("{base}.conv.bias"))?) } else { None },
                kernel: config.conv_kernel[i],
                stride: config.conv_stride[i],
                norm,
            });
        }

        let pos = "encoder.pos_conv_embed.conv";
        let (g_name, v_name) = if w.has(&format!("{pos}.weight_g")) {
            (format!("{pos}.weight_g"), format!("{pos}.weight_v"))
        } else {
            (format!("{pos}.parametrizations.weight.original0"), format!("{pos}.parametrizations.weight.original1"))
        };
        let (_, g) = w.get(&g_name)?;
        let (vshape, v) = w.get(&v_name)?;
        let (out, cg, kernel) = (vshape[0], vshape[1], vshape[2]);
        // weight norm over every axis except the kernel axis
        let mut weight = v.clone();
        for k in 0..kernel {
            let norm = (0..out * cg).map(|j| v[j * kernel + k].powi(2)).sum::<f32>().sqrt();
            for j in 0..out * cg {
                weight[j * kernel + k] = g[k] * v[j * kernel + k] / norm;
            }
        }
        let groups = config.num_conv_pos_embedding_groups;
        let per_group = out / groups;
        let full = Array2::from_shape_vec((out, cg * kernel), weight).map_err(shape_err)?;
        let pos_w = (0..groups)
            .map(|gi| full.slice(s![gi * per_group..(gi + 1) * per_group, ..]).t().as_standard_layout().to_owned())
            .collect();

        let blocks = (0..config.num_hidden_layers)
            .map(|i| {
                let base = format!("encoder.layers.{i}");
                Ok(Block {
                    q: w.linear(&format!("{base}.attention.q_proj"))?,
                    k: w.linear(&format!("{base}.attention.k_proj"))?,
                    v: w.linear(&format!("{base}.attention.v_proj"))?,
                    out: w.linear(&format!("{base}.attention.out_proj"))?,
                    attn_norm: w.norm(&format!("{base}.layer_norm"), eps)?,
                    ff_in: w.linear(&format!("{base}.feed_forward.intermediate_dense"))?,
                    ff_out: w.linear(&format!("{base}.feed_forward.output_dense"))?,
                    ff_norm: w.norm(&format!("{base}.final_layer_norm"), eps)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            id,
            normalize_input,
            convs,
            proj_norm: w.norm("feature_projection.layer_norm", eps)?,
            projection: w.linear("feature_projection.projection")?,
            pos_conv: PosConv { w: pos_w, b: w.vector(&format!("{pos}.bias"))?, kernel },
            encoder_norm: w.norm("encoder.layer_norm", eps)?,
            blocks,
            config,
        })
    }

    /// Hidden states 0..=upto (state 0 is the encoder input).
    pub fn hidden_states(&self, samples: &[f32], upto: usize) -> Vec<Array2<f32>> {
        let mut x = Array2::from_shape_vec((samples.len(), 1), samples.to_vec()).expect("column vector");
        if self.normalize_input {
            let n = samples.len().max(1) as f64;
            let mean = samples.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = samples.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + 1e-7).sqrt();
            x.mapv_inplace(|v| ((v as f64 - mean) * inv) as f32);
        }
        for conv in &self.convs {
            x = conv.forward(&x);
        }
        self.proj_norm.rows(&mut x);
        let mut h = self.projection.forward(x.view());
        h += &self.pos_conv.forward(&h);
        let stable = self.config.do_stable_layer_norm;
        if !stable {
            self.encoder_norm.rows(&mut h);
        }
        let heads = self.config.num_attention_heads;
        let mut states = Vec::with_capacity(upto + 1);
        states.push(h.clone());
        for (i, block) in self.blocks.iter().enumerate().take(upto) {
            h = block.forward(h, heads, stable);
            if stable && i + 1 == self.blocks.len() {
                self.encoder_norm.rows(&mut h);
            }
            states.push(h.clone());
        }
        states
    }
}

impl EmbeddingBackend for Wav2Vec2Backend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn hidden_dim(&self) -> usize {
        self.config.hidden_size
    }

    fn num_layers(&self) -> usize {
        self.config.num_hidden_layers
    }

    fn frame_stride_s(&self) -> f64 {
        self.config.conv_stride.iter().product::<usize>() as f64 / 16_000.0
    }

    fn extract_window(&self, input: &WindowInput<'_>) -> Result<Vec<Array2<f32>>> {
        let mut states = self.hidden_states(input.samples, self.num_layers());
        states.remove(0);
        Ok(states)
    }

    fn extract_layer(&self, input: &WindowInput<'_>, layer: usize) -> Result<Array2<f32>> {
        check_layer(self, layer)?;
        Ok(self.hidden_states(input.samples, layer).swap_remove(layer))
    }
}
