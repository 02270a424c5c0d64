//! Decoder-only transformer with separated word/watermark prediction spaces.
//!
//! The embedding matrix covers both vocabularies: rows `[0, V)` are word
//! tokens, rows `[V, V+V')` are watermark characters. The same matrix is the
//! tied output projection, but next-token prediction is routed by the target
//! kind to either a V-way word head or a V'-way watermark head, each with
//! its own softmax and loss. The output-side gradient at any position is
//! therefore block-structured: exactly zero on the other head's rows.

mod backward;
mod cache;
mod checkpoint;
mod forward;
mod scalar;
mod tensor;

pub use backward::DzRow;
pub use cache::DecodeSession;
pub use forward::{ForwardTrace, Losses, Routed};
pub use scalar::Scalar;
pub use tensor::Mat;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const LN_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Word vocabulary size V (specials included).
    pub vocab_words: usize,
    /// Watermark vocabulary size V' (the alphabet size).
    pub vocab_watermarks: usize,
    /// Embedding width E.
    pub embed: usize,
    /// Decoder layer count.
    pub layers: usize,
    /// Attention heads per layer.
    pub heads: usize,
    /// Context length k.
    pub block_size: usize,
    /// Layers with index below this receive no gradient.
    #[serde(default)]
    pub frozen_layers: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults: 2 layers, width 64, 2 heads, 128-token blocks.
    pub fn desk(vocab_words: usize, vocab_watermarks: usize) -> Self {
        Self {
            vocab_words,
            vocab_watermarks,
            embed: 64,
            layers: 2,
            heads: 2,
            block_size: 128,
            frozen_layers: 0,
            seed: 0,
        }
    }

    pub fn total_vocab(&self) -> usize {
        self.vocab_words + self.vocab_watermarks
    }

    pub fn head_dim(&self) -> usize {
        self.embed / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.heads == 0 || self.embed % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "embed width {} not divisible by {} heads",
                self.embed, self.heads
            )));
        }
        if self.frozen_layers > self.layers {
            return Err(Error::InvalidConfig(format!(
                "{} frozen layers exceed {} layers",
                self.frozen_layers, self.layers
            )));
        }
        if self.vocab_words == 0 || self.vocab_watermarks == 0 {
            return Err(Error::InvalidConfig("empty vocabulary".into()));
        }
        if self.block_size < 2 {
            return Err(Error::InvalidConfig("block size below 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams<S> {
    pub gain: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<S> {
    pub ln1: LayerNormParams<S>,
    pub qkv_w: Mat<S>,
    pub qkv_b: Vec<S>,
    pub proj_w: Mat<S>,
    pub proj_b: Vec<S>,
    pub ln2: LayerNormParams<S>,
    pub fc1_w: Mat<S>,
    pub fc1_b: Vec<S>,
    pub fc2_w: Mat<S>,
    pub fc2_b: Vec<S>,
}

/// All trainable tensors. Also used for gradients and optimizer moments,
/// which share the exact same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters<S> {
    /// Token embedding and tied output projection, (V+V') × E.
    pub wte: Mat<S>,
    /// Learned positions, k × E.
    pub wpe: Mat<S>,
    pub layers: Vec<LayerParams<S>>,
    pub lnf: LayerNormParams<S>,
}

impl<S: Scalar> Parameters<S> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let e = config.embed;
        let ln = || LayerNormParams {
            gain: vec![S::zero(); e],
            bias: vec![S::zero(); e],
        };
        Parameters {
            wte: Mat::zeros(config.total_vocab(), e),
            wpe: Mat::zeros(config.block_size, e),
            layers: (0..config.layers)
                .map(|_| LayerParams {
                    ln1: ln(),
                    qkv_w: Mat::zeros(e, 3 * e),
                    qkv_b: vec![S::zero(); 3 * e],
                    proj_w: Mat::zeros(e, e),
                    proj_b: vec![S::zero(); e],
                    ln2: ln(),
                    fc1_w: Mat::zeros(e, 4 * e),
                    fc1_b: vec![S::zero(); 4 * e],
                    fc2_w: Mat::zeros(4 * e, e),
                    fc2_b: vec![S::zero(); e],
                })
                .collect(),
            lnf: ln(),
        }
    }

    /// Flat views of every tensor, in the fixed checkpoint order.
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = vec![self.wte.data(), self.wpe.data()];
        for layer in &self.layers {
            out.push(&layer.ln1.gain);
            out.push(&layer.ln1.bias);
            out.push(layer.qkv_w.data());
            out.push(&layer.qkv_b);
            out.push(layer.proj_w.data());
            out.push(&layer.proj_b);
            out.push(&layer.ln2.gain);
            out.push(&layer.ln2.bias);
            out.push(layer.fc1_w.data());
            out.push(&layer.fc1_b);
            out.push(layer.fc2_w.data());
            out.push(&layer.fc2_b);
        }
        out.push(&self.lnf.gain);
        out.push(&self.lnf.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = vec![self.wte.data_mut(), self.wpe.data_mut()];
        for layer in &mut self.layers {
            out.push(&mut layer.ln1.gain);
            out.push(&mut layer.ln1.bias);
            out.push(layer.qkv_w.data_mut());
            out.push(&mut layer.qkv_b);
            out.push(layer.proj_w.data_mut());
            out.push(&mut layer.proj_b);
            out.push(&mut layer.ln2.gain);
            out.push(&mut layer.ln2.bias);
            out.push(layer.fc1_w.data_mut());
            out.push(&mut layer.fc1_b);
            out.push(layer.fc2_w.data_mut());
            out.push(&mut layer.fc2_b);
        }
        out.push(&mut self.lnf.gain);
        out.push(&mut self.lnf.bias);
        out
    }

    /// dst += src, tensor by tensor.
    pub fn add_assign(&mut self, other: &Parameters<S>) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            tensor::add_assign(dst, src);
        }
    }

    pub fn scale(&mut self, factor: S) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    pub fn zero_layers_below(&mut self, frozen: usize) {
        for layer in self.layers.iter_mut().take(frozen) {
            layer.ln1.gain.fill(S::zero());
            layer.ln1.bias.fill(S::zero());
            layer.qkv_w.fill(S::zero());
            layer.qkv_b.fill(S::zero());
            layer.proj_w.fill(S::zero());
            layer.proj_b.fill(S::zero());
            layer.ln2.gain.fill(S::zero());
            layer.ln2.bias.fill(S::zero());
            layer.fc1_w.fill(S::zero());
            layer.fc1_b.fill(S::zero());
            layer.fc2_w.fill(S::zero());
            layer.fc2_b.fill(S::zero());
        }
    }
}

/// Tensor names and shapes in checkpoint order.
pub fn tensor_manifest(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let e = config.embed;
    let mut out = vec![
        ("wte".to_string(), vec![config.total_vocab(), e]),
        ("wpe".to_string(), vec![config.block_size, e]),
    ];
    for i in 0..config.layers {
        let t = |suffix: &str, shape: Vec<usize>| (format!("layers.{i}.{suffix}"), shape);
        out.push(t("ln1.gain", vec![e]));
        out.push(t("ln1.bias", vec![e]));
        out.push(t("attn.qkv_w", vec![e, 3 * e]));
        out.push(t("attn.qkv_b", vec![3 * e]));
        out.push(t("attn.proj_w", vec![e, e]));
        out.push(t("attn.proj_b", vec![e]));
        out.push(t("ln2.gain", vec![e]));
        out.push(t("ln2.bias", vec![e]));
        out.push(t("mlp.fc1_w", vec![e, 4 * e]));
        out.push(t("mlp.fc1_b", vec![4 * e]));
        out.push(t("mlp.fc2_w", vec![4 * e, e]));
        out.push(t("mlp.fc2_b", vec![e]));
    }
    out.push(("lnf.gain".to_string(), vec![e]));
    out.push(("lnf.bias".to_string(), vec![e]));
    out
}

#[derive(Debug, Clone)]
pub struct WasaModel<S> {
    pub config: ModelConfig,
    pub params: Parameters<S>,
}

impl<S: Scalar> WasaModel<S> {
    /// Fresh model with N(0, 0.02) weights, zero biases, and unit layer-norm
    /// gains; bitwise deterministic per seed.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(config.seed, &["model-init"]);
        let mut params = Parameters::zeros(&config);

        fill_normal(&mut rng, params.wte.data_mut());
        fill_normal(&mut rng, params.wpe.data_mut());
        for layer in &mut params.layers {
            layer.ln1.gain.fill(S::one());
            fill_normal(&mut rng, layer.qkv_w.data_mut());
            fill_normal(&mut rng, layer.proj_w.data_mut());
            layer.ln2.gain.fill(S::one());
            fill_normal(&mut rng, layer.fc1_w.data_mut());
            fill_normal(&mut rng, layer.fc2_w.data_mut());
        }
        params.lnf.gain.fill(S::one());
        Ok(Self { config, params })
    }
}

/// Box-Muller normals scaled to the init std, drawn in tensor order.
fn fill_normal<S: Scalar, R: Rng>(rng: &mut R, out: &mut [S]) {
    for v in out {
        let mut u1: f64 = rng.gen();
        while u1 <= f64::MIN_POSITIVE {
            u1 = rng.gen();
        }
        let u2: f64 = rng.gen();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        *v = S::from_f64(z * INIT_STD);
    }
}
