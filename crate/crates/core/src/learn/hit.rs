//! Bidirectional imitation transformer predicting a chunk of whole-body
//! targets plus the camera features expected after the chunk.
//!
//! Token layout per sample: camera 0, camera 1, proprioception, then one
//! query per chunk entry. Camera and proprioception tokens carry learned
//! type embeddings; queries are fixed sinusoids. Predicted features are read
//! at the camera positions, the chunk at the query positions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{AttentionMask, Graph, Var};
use super::nn::{sinusoidal_embeddings, Linear, TransformerConfig, Trunk};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::model::NUM_JOINTS;
use crate::simenv::PROPRIO_DIM;

/// Tokens before the chunk queries.
const PREFIX: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HitConfig {
    pub feat_dim: usize,
    pub proprio_dim: usize,
    pub action_dim: usize,
    pub chunk: usize,
    pub transformer: TransformerConfig,
    /// Both cameras share one type embedding.
    pub tied_camera_embeddings: bool,
}

impl Default for HitConfig {
    fn default() -> Self {
        HitConfig {
            feat_dim: 16,
            proprio_dim: PROPRIO_DIM,
            action_dim: NUM_JOINTS,
            chunk: 50,
            transformer: TransformerConfig::default(),
            tied_camera_embeddings: false,
        }
    }
}

impl HitConfig {
    pub fn validate(&self) -> Result<()> {
        self.transformer.validate()?;
        if self.feat_dim == 0 || self.proprio_dim == 0 || self.action_dim == 0 || self.chunk == 0 {
            return Err(Error::Config("imitation dims and chunk length must be positive".into()));
        }
        Ok(())
    }

    pub fn seq(&self) -> usize {
        PREFIX + self.chunk
    }
}

/// Inputs for a batch of samples, one row each.
#[derive(Clone, Debug, PartialEq)]
pub struct HitInputs {
    pub cameras: [Tensor; 2],
    pub proprio: Tensor,
}

impl HitInputs {
    pub fn batch_size(&self) -> usize {
        self.proprio.rows
    }

    pub fn single(features: &[Vec<f64>; 2], proprio: &[f64]) -> Self {
        HitInputs {
            cameras: [Tensor::row_vector(&features[0]), Tensor::row_vector(&features[1])],
            proprio: Tensor::row_vector(proprio),
        }
    }
}

pub struct HitVars {
    /// (batch·chunk)×action_dim, sample-major.
    pub chunk: Var,
    /// (batch·2)×feat_dim: camera 0 then camera 1 for each sample.
    pub features: Var,
}

/// One sample's prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct HitOutput {
    pub chunk: Vec<Vec<f64>>,
    pub features: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitPolicy {
    pub cfg: HitConfig,
    pub store: ParamStore,
    cam_embed: Linear,
    proprio_embed: Linear,
    type_embed: usize,
    queries: Tensor,
    trunk: Trunk,
    chunk_head: Linear,
    feature_head: Linear,
}

impl HitPolicy {
    pub fn new(cfg: HitConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.transformer.width;
        let mut store = ParamStore::new();
        let cam_embed = Linear::fan_in(&mut store, "hit.cam_embed", cfg.feat_dim, d, rng);
        let proprio_embed = Linear::fan_in(&mut store, "hit.proprio_embed", cfg.proprio_dim, d, rng);
        let types = if cfg.tied_camera_embeddings { 2 } else { 3 };
        let type_embed = store.add_normal("hit.type_embed", types, d, 0.02, rng);
        let trunk = Trunk::new(&mut store, "hit", &cfg.transformer, rng);
        let head_std = 0.01;
        let chunk_head = Linear::new(&mut store, "hit.chunk_head", d, cfg.action_dim, head_std, rng);
        let feature_head = Linear::new(&mut store, "hit.feature_head", d, cfg.feat_dim, head_std, rng);
        Ok(HitPolicy {
            queries: sinusoidal_embeddings(cfg.chunk, d),
            cfg,
            store,
            cam_embed,
            proprio_embed,
            type_embed,
            trunk,
            chunk_head,
            feature_head,
        })
    }

    /// Rows of the type table for camera 0, camera 1 and proprioception.
    fn type_rows(&self) -> [usize; 3] {
        if self.cfg.tied_camera_embeddings {
            [0, 0, 1]
        } else {
            [0, 1, 2]
        }
    }

    fn check(&self, x: &HitInputs) -> Result<usize> {
        let b = x.batch_size();
        if b == 0 {
            return Err(Error::Empty("no imitation samples".into()));
        }
        for (c, t) in x.cameras.iter().enumerate() {
            if t.cols != self.cfg.feat_dim {
                return Err(Error::dim(self.cfg.feat_dim, t.cols, format!("camera {c} features")));
            }
            if t.rows != b {
                return Err(Error::dim(b, t.rows, format!("camera {c} rows")));
            }
        }
        if x.proprio.cols != self.cfg.proprio_dim {
            return Err(Error::dim(self.cfg.proprio_dim, x.proprio.cols, "imitation proprioception"));
        }
        Ok(b)
    }

    pub fn forward(&self, g: &mut Graph, x: &HitInputs) -> Result<HitVars> {
        let b = self.check(x)?;
        let (chunk, seq) = (self.cfg.chunk, self.cfg.seq());
        let types = g.param(self.type_embed);
        let rows = self.type_rows();
        let mut embedded = Vec::with_capacity(4);
        for (i, input) in [&x.cameras[0], &x.cameras[1], &x.proprio].into_iter().enumerate() {
            let v = g.input(input.clone());
            let e = if i < 2 { self.cam_embed.forward(g, v) } else { self.proprio_embed.forward(g, v) };
            let t = g.gather_rows(types, vec![rows[i]; b]);
            embedded.push(g.add(e, t));
        }
        let mut q = Tensor::zeros(b * chunk, self.cfg.transformer.width);
        for s in 0..b {
            q.data[s * self.queries.len()..(s + 1) * self.queries.len()].copy_from_slice(&self.queries.data);
        }
        embedded.push(g.input(q));
        let stacked = g.concat_rows(&embedded);
        // interleave into per-sample sequences
        let mut order = Vec::with_capacity(b * seq);
        for s in 0..b {
            order.extend([s, b + s, 2 * b + s]);
            order.extend((0..chunk).map(|j| 3 * b + s * chunk + j));
        }
        let tokens = g.gather_rows(stacked, order);
        let mask = AttentionMask {
            causal: false,
            key_valid: None,
        };
        let h = self.trunk.forward(g, tokens, seq, &mask);
        let query_rows: Vec<usize> = (0..b).flat_map(|s| (0..chunk).map(move |j| s * seq + PREFIX + j)).collect();
        let hq = g.gather_rows(h, query_rows);
        let camera_rows: Vec<usize> = (0..b).flat_map(|s| [s * seq, s * seq + 1]).collect();
        let hc = g.gather_rows(h, camera_rows);
        Ok(HitVars {
            chunk: self.chunk_head.forward(g, hq),
            features: self.feature_head.forward(g, hc),
        })
    }

    /// Prediction for one observation, without gradients.
    pub fn predict(&self, features: &[Vec<f64>; 2], proprio: &[f64]) -> Result<HitOutput> {
        let mut g = Graph::with_params(&self.store);
        let vars = self.forward(&mut g, &HitInputs::single(features, proprio))?;
        let chunk = g.value(vars.chunk);
        let feats = g.value(vars.features);
        Ok(HitOutput {
            chunk: (0..self.cfg.chunk).map(|j| chunk.row(j).to_vec()).collect(),
            features: [feats.row(0).to_vec(), feats.row(1).to_vec()],
        })
    }
}

/// Action MSE plus `lambda_feat` times feature MSE.
pub fn hit_loss(g: &mut Graph, pred_chunk: Var, gt_chunk: Var, pred_features: Var, future_features: Var, lambda_feat: f64) -> Var {
    let action = g.mse(pred_chunk, gt_chunk);
    if lambda_feat == 0.0 {
        return action;
    }
    let feature = g.mse(pred_features, future_features);
    let feature = g.scale(feature, lambda_feat);
    g.add(action, feature)
}
