//! Behavior cloning of the imitation transformer from demonstrations, and a
//! synthetic task whose actions depend only on what the cameras see.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{FeatureOracle, FeatureOracleConfig};
use super::graph::Graph;
use super::hit::{hit_loss, HitInputs, HitPolicy};
use super::params::{clip_grad_norm, Adam, AdamConfig};
use super::tensor::Tensor;
use crate::dataset::{DemoMetadata, DemoStep, Demonstration};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImitationConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub lambda_feat: f64,
    pub max_grad_norm: f64,
    /// Error evaluation period in epochs; the last epoch is always evaluated.
    pub eval_every: usize,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        ImitationConfig {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            lambda_feat: 1.0,
            max_grad_norm: 1.0,
            eval_every: 1,
        }
    }
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lambda_feat >= 0.0) {
            return Err(Error::Config("lambda_feat must be non-negative".into()));
        }
        Ok(())
    }
}

/// Sample `(demo, step)` pairs: inputs at `step`, targets over the chunk.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationBatch {
    pub inputs: HitInputs,
    /// (batch·chunk)×action_dim ground-truth targets.
    pub chunk: Tensor,
    /// (batch·2)×feat_dim features after the ground-truth chunk.
    pub future_features: Tensor,
}

/// Every `(demo, step)` position across `demos`.
pub fn sample_index(demos: &[Demonstration]) -> Vec<(usize, usize)> {
    demos
        .iter()
        .enumerate()
        .flat_map(|(d, demo)| (0..demo.len()).map(move |t| (d, t)))
        .collect()
}

/// Chunk entries past the end of a demonstration repeat its last action;
/// future features are those `chunk` steps ahead, clamped to the last step.
pub fn make_batch(policy: &HitPolicy, demos: &[Demonstration], picks: &[(usize, usize)]) -> Result<ImitationBatch> {
    let cfg = &policy.cfg;
    if picks.is_empty() {
        return Err(Error::Empty("no imitation samples".into()));
    }
    for demo in demos {
        if demo.proprio_dim != cfg.proprio_dim || demo.feat_dim != cfg.feat_dim || demo.action_dim != cfg.action_dim {
            return Err(Error::Config(format!(
                "demonstration dims ({}, {}, {}) do not match the policy ({}, {}, {})",
                demo.proprio_dim, demo.feat_dim, demo.action_dim, cfg.proprio_dim, cfg.feat_dim, cfg.action_dim
            )));
        }
    }
    let b = picks.len();
    let mut cams = [Tensor::zeros(b, cfg.feat_dim), Tensor::zeros(b, cfg.feat_dim)];
    let mut proprio = Tensor::zeros(b, cfg.proprio_dim);
    let mut chunk = Tensor::zeros(b * cfg.chunk, cfg.action_dim);
    let mut future = Tensor::zeros(2 * b, cfg.feat_dim);
    let widen = |dst: &mut [f64], src: &[f32]| dst.iter_mut().zip(src).for_each(|(d, s)| *d = *s as f64);
    for (i, &(d, t)) in picks.iter().enumerate() {
        let demo = &demos[d];
        let last = demo.len() - 1;
        let step = &demo.steps[t];
        for c in 0..2 {
            widen(cams[c].row_mut(i), &step.features[c]);
        }
        widen(proprio.row_mut(i), &step.proprio);
        for j in 0..cfg.chunk {
            widen(chunk.row_mut(i * cfg.chunk + j), &demo.steps[(t + j).min(last)].action);
        }
        let ahead = &demo.steps[(t + cfg.chunk).min(last)];
        for c in 0..2 {
            widen(future.row_mut(2 * i + c), &ahead.features[c]);
        }
    }
    Ok(ImitationBatch {
        inputs: HitInputs { cameras: cams, proprio },
        chunk,
        future_features: future,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationErrors {
    pub action_mse: f64,
    pub feature_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationLog {
    pub epoch: usize,
    pub loss: f64,
    pub train: ImitationErrors,
    pub validation: Option<ImitationErrors>,
}

/// Mean action and feature MSE over every sample of `demos`.
pub fn imitation_errors(policy: &HitPolicy, demos: &[Demonstration]) -> Result<ImitationErrors> {
    let index = sample_index(demos);
    if index.is_empty() {
        return Err(Error::Empty("no demonstrations to evaluate".into()));
    }
    let (mut action, mut feature) = (0.0, 0.0);
    for picks in index.chunks(64) {
        let batch = make_batch(policy, demos, picks)?;
        let mut g = Graph::with_params(&policy.store);
        let v = policy.forward(&mut g, &batch.inputs)?;
        let gt = g.input(batch.chunk);
        let ff = g.input(batch.future_features);
        let a = g.mse(v.chunk, gt);
        let f = g.mse(v.features, ff);
        let w = picks.len() as f64 / index.len() as f64;
        action += w * g.value(a).item();
        feature += w * g.value(f).item();
    }
    Ok(ImitationErrors {
        action_mse: action,
        feature_mse: feature,
    })
}

/// Minibatch Adam on the imitation loss; one log row per evaluated epoch.
pub fn train_imitation(
    policy: &mut HitPolicy,
    train: &[Demonstration],
    validation: &[Demonstration],
    cfg: &ImitationConfig,
    seed: u64,
) -> Result<Vec<ImitationLog>> {
    cfg.validate()?;
    let mut index = sample_index(train);
    if index.is_empty() {
        return Err(Error::Empty("no training demonstrations".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(cfg.adam.clone(), &policy.store);
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        index.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for picks in index.chunks(cfg.batch_size) {
            let batch = make_batch(policy, train, picks)?;
            let (loss, mut grads) = {
                let mut g = Graph::with_params(&policy.store);
                let v = policy.forward(&mut g, &batch.inputs)?;
                let gt = g.input(batch.chunk);
                let ff = g.input(batch.future_features);
                let l = hit_loss(&mut g, v.chunk, gt, v.features, ff, cfg.lambda_feat);
                (g.value(l).item(), g.backward(l).params(&policy.store))
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("imitation loss in epoch {epoch}")));
            }
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            adam.update(&mut policy.store, &grads);
            loss_sum += loss * picks.len() as f64;
        }
        if (epoch + 1) % cfg.eval_every.max(1) != 0 && epoch + 1 != cfg.epochs {
            continue;
        }
        logs.push(ImitationLog {
            epoch,
            loss: loss_sum / index.len() as f64,
            train: imitation_errors(policy, train)?,
            validation: if validation.is_empty() {
                None
            } else {
                Some(imitation_errors(policy, validation)?)
            },
        });
    }
    Ok(logs)
}

/// Demonstrations whose actions are a function of a hidden object latent
/// that reaches the policy only through the camera features; proprioception
/// carries the episode phase and a per-episode nuisance code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTaskConfig {
    pub steps: usize,
    pub rate: f64,
    pub latent_dim: usize,
    pub proprio_dim: usize,
    pub action_dim: usize,
    /// Std of the per-episode nuisance code in the proprioception.
    pub nuisance_scale: f64,
    /// Whether the first proprioception entry is the episode phase.
    pub phase_in_proprio: bool,
    /// Correlation of the nuisance code with the latent in leaky episodes.
    pub proprio_leak: f64,
    /// Amplitude of the trajectory shared by every episode.
    pub common_scale: f64,
    /// Std of the latent-to-action map entries.
    pub latent_scale: f64,
    pub feat_dim: usize,
    pub feature_gain: f64,
    /// Seeds the action map and the feature oracle, not the episodes.
    pub task_seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        SyntheticTaskConfig {
            steps: 60,
            rate: 50.0,
            latent_dim: 2,
            proprio_dim: 8,
            action_dim: 33,
            nuisance_scale: 1.0,
            phase_in_proprio: true,
            proprio_leak: 0.0,
            common_scale: 0.0,
            latent_scale: 0.5,
            feat_dim: 16,
            feature_gain: 1.0,
            task_seed: 0,
        }
    }
}

pub struct SyntheticTask {
    pub cfg: SyntheticTaskConfig,
    pub oracle: FeatureOracle,
    action_map: Vec<Vec<f64>>,
    /// Per joint (amplitude, frequency, phase) of the shared trajectory.
    common: Vec<(f64, f64, f64)>,
    /// Latent-to-nuisance map used by leaky episodes.
    leak_map: Vec<Vec<f64>>,
}

impl SyntheticTask {
    pub fn new(cfg: SyntheticTaskConfig) -> Result<Self> {
        if cfg.steps == 0 || cfg.latent_dim == 0 || cfg.action_dim == 0 || cfg.proprio_dim == 0 {
            return Err(Error::Config("synthetic task dims must be positive".into()));
        }
        let oracle = FeatureOracle::new(FeatureOracleConfig {
            input_dim: cfg.latent_dim + 1,
            feat_dim: cfg.feat_dim,
            gain: cfg.feature_gain,
            seed: cfg.task_seed,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.task_seed ^ 0x5eed);
        let n = Normal::new(0.0, cfg.latent_scale.max(f64::MIN_POSITIVE)).expect("positive std");
        let action_map = (0..cfg.action_dim)
            .map(|_| (0..cfg.latent_dim).map(|_| n.sample(&mut rng)).collect())
            .collect();
        let common = (0..cfg.action_dim)
            .map(|_| {
                (
                    cfg.common_scale * rng.gen_range(0.5..1.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let code_dim = cfg.proprio_dim - usize::from(cfg.phase_in_proprio);
        let unit = Normal::new(0.0, 1.0).expect("positive std");
        let leak_map = (0..code_dim)
            .map(|_| (0..cfg.latent_dim).map(|_| unit.sample(&mut rng)).collect())
            .collect();
        Ok(SyntheticTask {
            cfg,
            oracle,
            action_map,
            common,
            leak_map,
        })
    }

    fn phase(&self, t: usize) -> f64 {
        t as f64 / self.cfg.steps.max(2).saturating_sub(1) as f64
    }

    /// Action at step `t` for object latent `z`: the shared trajectory plus
    /// a smooth reach toward a latent-dependent pose.
    pub fn action(&self, z: &[f64], t: usize) -> Vec<f64> {
        let s = self.phase(t);
        let ramp = s * s * (3.0 - 2.0 * s);
        self.action_map
            .iter()
            .zip(&self.common)
            .map(|(row, &(a, f, p))| {
                a * (std::f64::consts::PI * f * s + p).sin() + ramp * row.iter().zip(z).map(|(m, v)| m * v).sum::<f64>()
            })
            .collect()
    }

    /// Camera features of the scene at step `t`.
    pub fn features(&self, z: &[f64], t: usize) -> Result<[Vec<f64>; 2]> {
        let mut x = z.to_vec();
        x.push(self.phase(t));
        self.oracle.features(&x)
    }

    /// One episode; with `leak` the nuisance code is partly a function of
    /// the latent, otherwise it is independent of it.
    pub fn demonstration(&self, rng: &mut impl Rng, leak: bool) -> Result<Demonstration> {
        let c = &self.cfg;
        let z: Vec<f64> = (0..c.latent_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let unit = Normal::new(0.0, 1.0).expect("positive std");
        let rho = if leak { c.proprio_leak.clamp(0.0, 1.0) } else { 0.0 };
        let code: Vec<f64> = self
            .leak_map
            .iter()
            .map(|row| {
                let signal: f64 = row.iter().zip(&z).map(|(m, v)| m * v).sum();
                c.nuisance_scale * (rho * signal + (1.0 - rho * rho).sqrt() * unit.sample(rng))
            })
            .collect();
        let narrow = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<f32>>();
        let mut steps = Vec::with_capacity(c.steps);
        for t in 0..c.steps {
            let mut proprio = if c.phase_in_proprio { vec![self.phase(t)] } else { Vec::new() };
            proprio.extend(&code);
            let [f0, f1] = self.features(&z, t)?;
            steps.push(DemoStep {
                proprio: narrow(&proprio),
                features: [narrow(&f0), narrow(&f1)],
                action: narrow(&self.action(&z, t)),
            });
        }
        Demonstration::new(
            c.rate,
            steps,
            DemoMetadata {
                name: "synthetic".into(),
                latent: z,
                ..DemoMetadata::default()
            },
        )
    }

    pub fn demonstrations(&self, n: usize, seed: u64, leak: bool) -> Result<Vec<Demonstration>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.demonstration(&mut rng, leak)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::hit::HitConfig;
    use crate::learn::nn::TransformerConfig;

    fn tiny_policy(task: &SyntheticTask, chunk: usize) -> HitPolicy {
        let cfg = HitConfig {
            feat_dim: task.cfg.feat_dim,
            proprio_dim: task.cfg.proprio_dim,
            action_dim: task.cfg.action_dim,
            chunk,
            transformer: TransformerConfig {
                width: 16,
                heads: 2,
                layers: 1,
                mlp_ratio: 2,
            },
            tied_camera_embeddings: false,
        };
        HitPolicy::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn batch_pads_with_last_action() {
        let task = SyntheticTask::new(SyntheticTaskConfig {
            steps: 5,
            ..SyntheticTaskConfig::default()
        })
        .unwrap();
        let demos = task.demonstrations(1, 3, false).unwrap();
        let p = tiny_policy(&task, 4);
        let b = make_batch(&p, &demos, &[(0, 3)]).unwrap();
        let last: Vec<f64> = demos[0].steps[4].action.iter().map(|v| *v as f64).collect();
        assert_eq!(b.chunk.row(1), &last[..]);
        assert_eq!(b.chunk.row(3), &last[..]);
        let f: Vec<f64> = demos[0].steps[4].features[1].iter().map(|v| *v as f64).collect();
        assert_eq!(b.future_features.row(1), &f[..]);
    }

    #[test]
    fn training_is_deterministic() {
        let task = SyntheticTask::new(SyntheticTaskConfig {
            steps: 8,
            ..SyntheticTaskConfig::default()
        })
        .unwrap();
        let demos = task.demonstrations(2, 1, false).unwrap();
        let cfg = ImitationConfig {
            epochs: 2,
            batch_size: 4,
            ..ImitationConfig::default()
        };
        let run = || {
            let mut p = tiny_policy(&task, 4);
            let logs = train_imitation(&mut p, &demos, &demos, &cfg, 7).unwrap();
            (p.store, logs)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn latent_is_visible_only_through_features() {
        let task = SyntheticTask::new(SyntheticTaskConfig::default()).unwrap();
        let a = task.demonstrations(1, 1, false).unwrap().remove(0);
        let b = task.demonstrations(1, 2, false).unwrap().remove(0);
        assert_ne!(a.metadata.latent, b.metadata.latent);
        assert_ne!(a.steps[10].features, b.steps[10].features);
        assert_ne!(a.steps[10].action, b.steps[10].action);
        assert_eq!(a.steps[10].proprio[0], b.steps[10].proprio[0]);
    }
}
