//! Causal transformer policy for whole-body shadowing.
//!
//! Each timestep is one token: proprioception followed by the target pose.
//! Histories shorter than the context are left-padded; padded keys are
//! masked and positions count from the first real token, so a padded history
//! behaves exactly like the same history without padding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{AttentionMask, Graph, Var};
use super::nn::{Linear, TransformerConfig, Trunk};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::retarget::TARGET_DIM;
use crate::simenv::PROPRIO_DIM;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShadowPolicyConfig {
    pub context_length: usize,
    pub proprio_dim: usize,
    pub target_dim: usize,
    pub action_dim: usize,
    pub transformer: TransformerConfig,
    /// When set, the action mean is the head output plus the target token
    /// slice starting here (joint targets for the humanoid).
    pub residual_offset: Option<usize>,
    pub init_log_std: f64,
    /// Standard deviation of the mean head's initial weights.
    pub head_init_std: f64,
}

impl Default for ShadowPolicyConfig {
    fn default() -> Self {
        ShadowPolicyConfig {
            context_length: 8,
            proprio_dim: PROPRIO_DIM,
            target_dim: TARGET_DIM,
            action_dim: 19,
            transformer: TransformerConfig::default(),
            residual_offset: Some(TARGET_DIM - 19),
            init_log_std: -2.5,
            head_init_std: 0.0,
        }
    }
}

impl ShadowPolicyConfig {
    pub fn token_dim(&self) -> usize {
        self.proprio_dim + self.target_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.transformer.validate()?;
        if self.context_length == 0 || self.action_dim == 0 || self.token_dim() == 0 {
            return Err(Error::Config("context, action and token sizes must be positive".into()));
        }
        if let Some(o) = self.residual_offset {
            if o + self.action_dim > self.target_dim {
                return Err(Error::Config(format!(
                    "residual slice {o}..{} exceeds the {}-dim target token",
                    o + self.action_dim,
                    self.target_dim
                )));
            }
        }
        Ok(())
    }
}

/// Left-padded batch of histories, ready for the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowBatch {
    pub seq: usize,
    /// (batch·seq)×token_dim, zeros on padded rows.
    pub tokens: Tensor,
    pub valid: Vec<bool>,
    pub positions: Vec<usize>,
    /// batch×action_dim residual base, if the policy is residual.
    pub residual: Option<Tensor>,
}

impl ShadowBatch {
    pub fn batch_size(&self) -> usize {
        self.tokens.rows / self.seq
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowPolicy {
    pub cfg: ShadowPolicyConfig,
    pub store: ParamStore,
    embed: Linear,
    pos: usize,
    trunk: Trunk,
    mean_head: Linear,
    value_head: Linear,
    log_std: usize,
}

/// Graph handles of one forward pass (last position of every history).
#[derive(Clone, Copy, Debug)]
pub struct ShadowVars {
    pub mean: Var,
    pub value: Var,
    pub log_std: Var,
}

/// Plain outputs for one history.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
}

impl ShadowPolicy {
    pub fn new(cfg: ShadowPolicyConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.transformer.width;
        let mut store = ParamStore::new();
        let embed = Linear::fan_in(&mut store, "shadow.embed", cfg.token_dim(), d, rng);
        let pos = store.add_normal("shadow.pos", cfg.context_length, d, 0.02, rng);
        let trunk = Trunk::new(&mut store, "shadow", &cfg.transformer, rng);
        let mean_head = Linear::new(&mut store, "shadow.mean_head", d, cfg.action_dim, cfg.head_init_std, rng);
        let value_head = Linear::fan_in(&mut store, "shadow.value_head", d, 1, rng);
        let log_std = store.add(
            "shadow.log_std",
            Tensor::filled(1, cfg.action_dim, cfg.init_log_std),
        );
        Ok(ShadowPolicy {
            cfg,
            store,
            embed,
            pos,
            trunk,
            mean_head,
            value_head,
            log_std,
        })
    }

    /// Packs histories (oldest first, each token proprio ++ target).
    ///
    /// `seq` is the padded length; every history must be non-empty and no
    /// longer than `seq`, which may not exceed the context length.
    pub fn batch(&self, histories: &[&[Vec<f64>]], seq: usize) -> Result<ShadowBatch> {
        let cfg = &self.cfg;
        if histories.is_empty() {
            return Err(Error::Empty("no histories".into()));
        }
        if seq == 0 || seq > cfg.context_length {
            return Err(Error::InvalidArgument(format!(
                "sequence length {seq} outside 1..={}",
                cfg.context_length
            )));
        }
        let td = cfg.token_dim();
        let mut tokens = Tensor::zeros(histories.len() * seq, td);
        let mut valid = vec![false; histories.len() * seq];
        let mut positions = vec![0; histories.len() * seq];
        let mut residual = cfg.residual_offset.map(|_| Tensor::zeros(histories.len(), cfg.action_dim));
        for (b, h) in histories.iter().enumerate() {
            if h.is_empty() || h.len() > seq {
                return Err(Error::InvalidArgument(format!(
                    "history length {} outside 1..={seq}",
                    h.len()
                )));
            }
            let pad = seq - h.len();
            for (t, tok) in h.iter().enumerate() {
                if tok.len() != td {
                    return Err(Error::dim(td, tok.len(), "shadow token"));
                }
                let row = b * seq + pad + t;
                tokens.row_mut(row).copy_from_slice(tok);
                valid[row] = true;
                positions[row] = t;
            }
            if let (Some(o), Some(r)) = (cfg.residual_offset, residual.as_mut()) {
                let last = h.last().expect("non-empty");
                let start = cfg.proprio_dim + o;
                r.row_mut(b).copy_from_slice(&last[start..start + cfg.action_dim]);
            }
        }
        Ok(ShadowBatch {
            seq,
            tokens,
            valid,
            positions,
            residual,
        })
    }

    /// Per-row trunk features, (batch·seq)×width.
    fn trunk_features(&self, g: &mut Graph, batch: &ShadowBatch) -> Var {
        let x = g.input(batch.tokens.clone());
        let e = self.embed.forward(g, x);
        let pos = g.param(self.pos);
        let p = g.gather_rows(pos, batch.positions.clone());
        let h = g.add(e, p);
        let mask = AttentionMask {
            causal: true,
            key_valid: Some(batch.valid.clone()),
        };
        self.trunk.forward(g, h, batch.seq, &mask)
    }

    fn heads(&self, g: &mut Graph, feats: Var, residual: Option<&Tensor>) -> (Var, Var) {
        let mut mean = self.mean_head.forward(g, feats);
        if let Some(r) = residual {
            let r = g.input(r.clone());
            mean = g.add(mean, r);
        }
        let value = self.value_head.forward(g, feats);
        (mean, value)
    }

    /// Outputs at the last position of every history.
    pub fn forward(&self, g: &mut Graph, batch: &ShadowBatch) -> ShadowVars {
        let feats = self.trunk_features(g, batch);
        let last: Vec<usize> = (0..batch.batch_size()).map(|b| (b + 1) * batch.seq - 1).collect();
        let feats = g.gather_rows(feats, last);
        let (mean, value) = self.heads(g, feats, batch.residual.as_ref());
        ShadowVars {
            mean,
            value,
            log_std: g.param(self.log_std),
        }
    }

    /// Outputs at every position of one unpadded history.
    pub fn forward_sequence(&self, history: &[Vec<f64>]) -> Result<Vec<ShadowOutput>> {
        let batch = self.batch(&[history], history.len())?;
        let mut g = Graph::with_params(&self.store);
        let feats = self.trunk_features(&mut g, &batch);
        let residual = self.cfg.residual_offset.map(|o| {
            let start = self.cfg.proprio_dim + o;
            let rows: Vec<Vec<f64>> = history
                .iter()
                .map(|t| t[start..start + self.cfg.action_dim].to_vec())
                .collect();
            Tensor::from_rows(&rows).expect("equal rows")
        });
        let (mean, value) = self.heads(&mut g, feats, residual.as_ref());
        let log_std = self.store.get(self.log_std).data.clone();
        Ok((0..history.len())
            .map(|t| ShadowOutput {
                mean: g.value(mean).row(t).to_vec(),
                log_std: log_std.clone(),
                value: g.value(value).get(t, 0),
            })
            .collect())
    }

    /// Outputs at the last position of each history, without gradients.
    pub fn act(&self, histories: &[&[Vec<f64>]]) -> Result<Vec<ShadowOutput>> {
        let seq = histories.iter().map(|h| h.len()).max().unwrap_or(0);
        let batch = self.batch(histories, seq)?;
        let mut g = Graph::with_params(&self.store);
        let vars = self.forward(&mut g, &batch);
        let log_std = g.value(vars.log_std).data.clone();
        Ok((0..histories.len())
            .map(|b| ShadowOutput {
                mean: g.value(vars.mean).row(b).to_vec(),
                log_std: log_std.clone(),
                value: g.value(vars.value).get(b, 0),
            })
            .collect())
    }

    pub fn token(proprio: &[f64], target: &[f64]) -> Vec<f64> {
        let mut t = Vec::with_capacity(proprio.len() + target.len());
        t.extend_from_slice(proprio);
        t.extend_from_slice(target);
        t
    }
}

/// Per-row diagonal Gaussian log density, batch×1.
/// Rolling window of the most recent tokens, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenHistory {
    context: usize,
    tokens: Vec<Vec<f64>>,
}

impl TokenHistory {
    pub fn new(context: usize) -> Self {
        TokenHistory {
            context: context.max(1),
            tokens: Vec::with_capacity(context),
        }
    }

    /// Appends a token, dropping the oldest once the window is full.
    pub fn push(&mut self, token: Vec<f64>) {
        if self.tokens.len() == self.context {
            self.tokens.remove(0);
        }
        self.tokens.push(token);
    }

    pub fn clear(&mut self) {
        self.tokens.clear();
    }

    pub fn tokens(&self) -> &[Vec<f64>] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Deterministic action (the distribution mean) for the current window.
    pub fn act(&self, policy: &ShadowPolicy) -> Result<Vec<f64>> {
        Ok(policy.act(&[&self.tokens])?.remove(0).mean)
    }
}

pub fn gaussian_log_prob(g: &mut Graph, actions: Var, mean: Var, log_std: Var) -> Var {
    let dims = g.value(mean).cols as f64;
    let diff = g.sub(actions, mean);
    let neg = g.neg(log_std);
    let inv_std = g.exp(neg);
    let z = g.mul_tiled(diff, inv_std);
    let z2 = g.square(z);
    let quad = g.sum_cols(z2);
    let quad = g.scale(quad, -0.5);
    let ls = g.sum(log_std);
    let n = g.value(mean).rows;
    let ones = g.input(Tensor::filled(n, 1, 1.0));
    let ls_rows = g.mul_tiled(ones, ls);
    let lp = g.sub(quad, ls_rows);
    g.add_scalar(lp, -0.5 * dims * (2.0 * std::f64::consts::PI).ln())
}

/// Entropy of the diagonal Gaussian, 1×1.
pub fn gaussian_entropy(g: &mut Graph, log_std: Var) -> Var {
    let dims = g.value(log_std).cols as f64;
    let s = g.sum(log_std);
    g.add_scalar(s, 0.5 * dims * (1.0 + (2.0 * std::f64::consts::PI).ln()))
}
