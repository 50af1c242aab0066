//! Two-rate control: the imitation policy proposes whole-body target chunks
//! at a low rate and the shadowing policy tracks one chunk entry per step.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hit::{HitOutput, HitPolicy};
use super::shadow::{ShadowPolicy, TokenHistory};
use crate::error::{Error, Result};
use crate::model::{BODY, HANDS, WRISTS};
use crate::retarget::{TargetStream, WholeBodyTarget};
use crate::simenv::{EnvParams, HumanoidEnv, Termination, TrajectoryRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeployConfig {
    /// Low-level steps to run.
    pub steps: usize,
    /// Low-level steps per imitation query.
    pub query_interval: usize,
    /// Exponential weight decay over overlapping chunks; `None` consumes the
    /// freshest chunk in order.
    pub temporal_ensemble: Option<f64>,
    /// Overwrite the predicted feature tokens with zeros after each query.
    pub zero_feature_tokens: bool,
}

impl Default for DeployConfig {
    fn default() -> Self {
        DeployConfig {
            steps: 100,
            query_interval: 2,
            temporal_ensemble: None,
            zero_feature_tokens: false,
        }
    }
}

impl DeployConfig {
    pub fn validate(&self, chunk: usize) -> Result<()> {
        if self.query_interval == 0 || self.query_interval > chunk {
            return Err(Error::Config(format!(
                "query interval must lie in 1..={chunk}, got {}",
                self.query_interval
            )));
        }
        if let Some(m) = self.temporal_ensemble {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Config("temporal ensemble decay must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// One low-level step of the instrumented trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeployStep {
    pub step: usize,
    /// Whether the imitation policy was queried before this step.
    pub queried: bool,
    /// Ordinal of the chunk in use.
    pub chunk_id: usize,
    /// Entry of that chunk consumed by this step.
    pub chunk_index: usize,
    /// 33 joint targets handed to the tracker.
    pub target: Vec<f64>,
    /// 19 body setpoints sent to the PD loop.
    pub action: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeployTrace {
    pub steps: Vec<DeployStep>,
    pub queries: usize,
    /// Predicted feature tokens of each query, after any zeroing.
    pub predicted_features: Vec<[Vec<f64>; 2]>,
    pub log: Vec<TrajectoryRecord>,
    pub termination: Option<Termination>,
}

impl DeployTrace {
    /// Steps per query, or `None` before the first query.
    pub fn steps_per_query(&self) -> Option<f64> {
        (self.queries > 0).then(|| self.steps.len() as f64 / self.queries as f64)
    }
}

/// Runs both policies on `env`. `stream` supplies the episode start and the
/// velocity and orientation fields of every target; joint targets come from
/// the imitation chunks. `features` maps (step, proprioception) to the two
/// camera feature vectors.
#[allow(clippy::too_many_arguments)]
pub fn deploy_loop(
    shadow: &ShadowPolicy,
    hit: &HitPolicy,
    env: &mut HumanoidEnv,
    stream: TargetStream,
    params: EnvParams,
    features: &mut dyn FnMut(usize, &[f64]) -> Result<[Vec<f64>; 2]>,
    cfg: &DeployConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DeployTrace> {
    cfg.validate(hit.cfg.chunk)?;
    if hit.cfg.action_dim != env.model().num_joints() {
        return Err(Error::dim(env.model().num_joints(), hit.cfg.action_dim, "imitation action"));
    }
    env.enable_log();
    env.reset(stream, params, rng)?;
    let (mut proprio, _) = env.observation()?;
    let mut history = TokenHistory::new(shadow.cfg.context_length);
    let mut chunks: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    let mut trace = DeployTrace {
        steps: Vec::with_capacity(cfg.steps),
        queries: 0,
        predicted_features: Vec::new(),
        log: Vec::new(),
        termination: None,
    };
    for k in 0..cfg.steps {
        let queried = k % cfg.query_interval == 0;
        if queried {
            let HitOutput { chunk, features: mut predicted } = hit.predict(&features(k, &proprio)?, &proprio)?;
            if cfg.zero_feature_tokens {
                predicted.iter_mut().for_each(|f| f.iter_mut().for_each(|v| *v = 0.0));
            }
            trace.predicted_features.push(predicted);
            chunks.push((k, chunk));
            trace.queries += 1;
            if cfg.temporal_ensemble.is_none() {
                chunks.drain(..chunks.len() - 1);
            } else {
                chunks.retain(|(start, c)| k - start < c.len());
            }
        }
        let (start, _) = chunks.last().expect("queried at step 0");
        let chunk_index = k - start;
        let q33 = blend(&chunks, k, cfg.temporal_ensemble);
        let q33 = env.model().clamp_to_limits(&q33);
        let frame = env.targets().frames[env.target_index().min(env.targets().len() - 1)].clone();
        env.override_target(with_joints(frame, &q33))?;
        let (p, target) = env.observation()?;
        history.push(ShadowPolicy::token(&p, &target));
        let action = history.act(shadow)?;
        trace.steps.push(DeployStep {
            step: k,
            queried,
            chunk_id: trace.queries - 1,
            chunk_index,
            target: q33,
            action: action.clone(),
        });
        let out = env.step(&action)?;
        proprio = out.proprio;
        if out.done {
            trace.termination = out.termination;
            break;
        }
    }
    trace.log = env.take_log();
    Ok(trace)
}

/// Target for step `k`: the freshest chunk's entry, or an exponentially
/// weighted mean over every live chunk with the oldest weighted highest.
fn blend(chunks: &[(usize, Vec<Vec<f64>>)], k: usize, decay: Option<f64>) -> Vec<f64> {
    let Some(m) = decay else {
        let (start, c) = chunks.last().expect("non-empty");
        return c[k - start].clone();
    };
    let mut acc = vec![0.0; chunks[0].1[0].len()];
    let mut total = 0.0;
    for (i, (start, c)) in chunks.iter().enumerate() {
        let w = (-m * i as f64).exp();
        for (a, v) in acc.iter_mut().zip(&c[k - start]) {
            *a += w * v;
        }
        total += w;
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

fn with_joints(mut frame: WholeBodyTarget, q33: &[f64]) -> WholeBodyTarget {
    frame.pose.q = q33[BODY].to_vec();
    frame.wrists = [q33[WRISTS.start], q33[WRISTS.start + 1]];
    frame.hands = q33[HANDS].to_vec();
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_weights_favor_older_chunks() {
        let chunks = vec![(0, vec![vec![0.0]; 4]), (2, vec![vec![1.0]; 4])];
        assert_eq!(blend(&chunks, 3, None), vec![1.0]);
        assert_eq!(blend(&chunks, 3, Some(0.0)), vec![0.5]);
        let w = (-1.0f64).exp();
        assert!((blend(&chunks, 3, Some(1.0))[0] - w / (1.0 + w)).abs() < 1e-15);
    }

    #[test]
    fn interval_must_fit_in_chunk() {
        let cfg = DeployConfig {
            query_interval: 51,
            ..DeployConfig::default()
        };
        assert!(cfg.validate(50).is_err());
        assert!(DeployConfig::default().validate(50).is_ok());
    }
}
