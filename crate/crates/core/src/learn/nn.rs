//! Layers shared by both transformers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{AttentionMask, Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerConfig {
    pub width: usize,
    pub heads: usize,
    pub layers: usize,
    /// Hidden width of the feed-forward sublayer as a multiple of `width`.
    pub mlp_ratio: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            width: 128,
            heads: 4,
            layers: 3,
            mlp_ratio: 4,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.heads == 0 || self.mlp_ratio == 0 {
            return Err(Error::Config("transformer width, heads and mlp_ratio must be positive".into()));
        }
        if self.width % self.heads != 0 {
            return Err(Error::Config(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    /// Weights ~ Normal(0, std), zero bias.
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, std: f64, rng: &mut impl Rng) -> Self {
        let w = store.add_normal(format!("{name}.w"), inputs, outputs, std, rng);
        let b = store.add(format!("{name}.b"), Tensor::zeros(1, outputs));
        Linear { w, b }
    }

    /// Default fan-in scaling.
    pub fn fan_in(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Linear::new(store, name, inputs, outputs, 1.0 / (inputs as f64).sqrt(), rng)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.matmul(x, w);
        g.add_tiled(y, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerNorm {
    pub gamma: usize,
    pub beta: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(1, width, 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(1, width)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    ln1: LayerNorm,
    qkv: Linear,
    proj: Linear,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
    heads: usize,
    width: usize,
}

impl Block {
    pub fn new(store: &mut ParamStore, name: &str, cfg: &TransformerConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.width;
        let hidden = d * cfg.mlp_ratio;
        let out_std = 1.0 / (d as f64).sqrt() / (2.0 * cfg.layers.max(1) as f64).sqrt();
        Block {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
            qkv: Linear::fan_in(store, &format!("{name}.qkv"), d, 3 * d, rng),
            proj: Linear::new(store, &format!("{name}.proj"), d, d, out_std, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
            fc1: Linear::fan_in(store, &format!("{name}.fc1"), d, hidden, rng),
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, d, out_std, rng),
            heads: cfg.heads,
            width: d,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var, seq: usize, mask: &AttentionMask) -> Var {
        let d = self.width;
        let h = self.ln1.forward(g, x);
        let qkv = self.qkv.forward(g, h);
        let q = g.slice_cols(qkv, 0, d);
        let k = g.slice_cols(qkv, d, d);
        let v = g.slice_cols(qkv, 2 * d, d);
        let a = g.attention(q, k, v, self.heads, seq, mask);
        let a = self.proj.forward(g, a);
        let x = g.add(x, a);
        let h = self.ln2.forward(g, x);
        let h = self.fc1.forward(g, h);
        let h = g.gelu(h);
        let h = self.fc2.forward(g, h);
        g.add(x, h)
    }
}

/// Stack of blocks followed by a final layer norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trunk {
    blocks: Vec<Block>,
    ln_f: LayerNorm,
}

impl Trunk {
    pub fn new(store: &mut ParamStore, name: &str, cfg: &TransformerConfig, rng: &mut impl Rng) -> Self {
        Trunk {
            blocks: (0..cfg.layers)
                .map(|l| Block::new(store, &format!("{name}.block{l}"), cfg, rng))
                .collect(),
            ln_f: LayerNorm::new(store, &format!("{name}.ln_f"), cfg.width),
        }
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var, seq: usize, mask: &AttentionMask) -> Var {
        for b in &self.blocks {
            x = b.forward(g, x, seq, mask);
        }
        self.ln_f.forward(g, x)
    }
}

/// Fixed sinusoidal embeddings, one row per position.
pub fn sinusoidal_embeddings(positions: usize, width: usize) -> Tensor {
    let mut t = Tensor::zeros(positions, width);
    for p in 0..positions {
        for i in 0..width {
            let pair = (i / 2) as f64;
            let freq = 1.0 / 10000f64.powf(2.0 * pair / width as f64);
            let a = p as f64 * freq;
            t.data[p * width + i] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    t
}
