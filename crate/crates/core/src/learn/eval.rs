//! Deterministic policy rollouts with optional pelvis pushes.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shadow::{ShadowPolicy, TokenHistory};
use crate::error::{Error, Result};
use crate::model::{HumanoidModel, NUM_BODY_JOINTS};
use crate::retarget::TargetStream;
use crate::simenv::{EnvParams, HumanoidEnv, SimConfig, Termination, TrajectoryRecord, REWARD_TERMS};

/// Lateral force on the pelvis starting before policy step `step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushSpec {
    pub step: usize,
    /// World frame, N.
    pub force: [f64; 3],
    /// s.
    pub duration: f64,
}

impl Default for PushSpec {
    fn default() -> Self {
        PushSpec {
            step: 250,
            force: [0.0, 30.0, 0.0],
            duration: 0.1,
        }
    }
}

impl PushSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) || self.force.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config("push needs a finite force and positive duration".into()));
        }
        Ok(())
    }

    /// First policy step after the force has stopped.
    pub fn end_step(&self, policy_dt: f64) -> usize {
        self.step + (self.duration / policy_dt).ceil() as usize
    }
}

/// When the joint-position reward counts as recovered after a push.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryRule {
    /// Steps before the push averaged into the reference level.
    pub baseline_steps: usize,
    /// Share of the reference level that must be regained; for a penalty
    /// this allows the magnitude to exceed the reference by `1 - fraction`.
    pub fraction: f64,
    /// Consecutive steps the level must hold.
    pub hold_steps: usize,
}

impl Default for RecoveryRule {
    fn default() -> Self {
        RecoveryRule {
            baseline_steps: 50,
            fraction: 0.9,
            hold_steps: 25,
        }
    }
}

impl RecoveryRule {
    /// Lowest acceptable reward for the reference level `pre`.
    pub fn threshold(&self, pre: f64) -> f64 {
        pre - (1.0 - self.fraction) * pre.abs()
    }

    /// Pre-push reference level, if the episode reached the push.
    pub fn baseline(&self, joint_pos: &[f64], push: &PushSpec) -> Option<f64> {
        if push.step == 0 || push.step > joint_pos.len() {
            return None;
        }
        let lo = push.step.saturating_sub(self.baseline_steps.max(1));
        let w = &joint_pos[lo..push.step];
        Some(w.iter().sum::<f64>() / w.len() as f64)
    }

    /// Seconds from push onset until the reward is back above the threshold
    /// and stays there for `hold_steps`; `None` if that never happens.
    pub fn recovery_time(&self, joint_pos: &[f64], push: &PushSpec, policy_dt: f64) -> Option<f64> {
        let threshold = self.threshold(self.baseline(joint_pos, push)?);
        let hold = self.hold_steps.max(1);
        (push.end_step(policy_dt)..joint_pos.len().saturating_sub(hold - 1))
            .find(|&k| joint_pos[k..k + hold].iter().all(|&r| r >= threshold))
            .map(|k| (k + 1 - push.step) as f64 * policy_dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: usize,
    pub steps: usize,
    pub termination: Option<Termination>,
    pub fell: bool,
    pub max_abs_roll: f64,
    pub max_abs_pitch: f64,
    /// Unweighted per-term means, in reward-term order.
    pub mean_terms: Vec<f64>,
    pub mean_reward: f64,
    /// Mean over steps of the RMS body joint error, rad.
    pub tracking_error: f64,
    pub pre_push_joint_pos: Option<f64>,
    pub recovery_time: Option<f64>,
}

impl EpisodeReport {
    /// Summarizes a trajectory log.
    pub fn from_log(
        episode: usize,
        log: &[TrajectoryRecord],
        termination: Option<Termination>,
        push: Option<&PushSpec>,
        rule: &RecoveryRule,
        policy_dt: f64,
    ) -> Self {
        let n = log.len().max(1) as f64;
        let mut mean_terms = vec![0.0; REWARD_TERMS.len()];
        let mut mean_reward = 0.0;
        let mut tracking_error = 0.0;
        let (mut max_abs_roll, mut max_abs_pitch) = (0.0f64, 0.0f64);
        for r in log {
            for (m, t) in mean_terms.iter_mut().zip(r.reward.terms()) {
                *m += t / n;
            }
            mean_reward += r.reward.total / n;
            tracking_error += (-r.reward.joint_pos / NUM_BODY_JOINTS as f64).max(0.0).sqrt() / n;
            max_abs_roll = max_abs_roll.max(r.roll_pitch_yaw[0].abs());
            max_abs_pitch = max_abs_pitch.max(r.roll_pitch_yaw[1].abs());
        }
        let fault = log.last().is_some_and(|r| r.fault);
        let joint_pos: Vec<f64> = log.iter().map(|r| r.reward.joint_pos).collect();
        let fell = fault || termination.is_some_and(Termination::is_failure);
        let (pre, recovery) = match push {
            Some(p) => (
                rule.baseline(&joint_pos, p),
                if fell { None } else { rule.recovery_time(&joint_pos, p, policy_dt) },
            ),
            None => (None, None),
        };
        EpisodeReport {
            episode,
            steps: log.len(),
            termination,
            fell,
            max_abs_roll,
            max_abs_pitch,
            mean_terms,
            mean_reward,
            tracking_error,
            pre_push_joint_pos: pre,
            recovery_time: recovery,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub params: EnvParams,
    pub push: Option<PushSpec>,
    pub recovery: RecoveryRule,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 1,
            params: EnvParams::default(),
            push: None,
            recovery: RecoveryRule::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub episodes: Vec<EpisodeReport>,
    pub mean_terms: Vec<(String, f64)>,
    pub mean_tracking_error: f64,
    pub fall_rate: f64,
    /// One entry per pushed episode; `None` for falls and non-recoveries.
    pub recovery_times: Vec<Option<f64>>,
}

/// Runs one episode with the policy mean as the action.
pub fn run_episode(
    policy: &ShadowPolicy,
    env: &mut HumanoidEnv,
    stream: TargetStream,
    params: EnvParams,
    push: Option<&PushSpec>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<TrajectoryRecord>, Option<Termination>)> {
    if let Some(p) = push {
        p.validate()?;
    }
    env.enable_log();
    let (proprio, target) = {
        env.reset(stream, params, rng)?;
        env.observation()?
    };
    let mut history = TokenHistory::new(policy.cfg.context_length);
    history.push(ShadowPolicy::token(&proprio, &target));
    let mut termination = None;
    for k in 0.. {
        if let Some(p) = push.filter(|p| p.step == k) {
            env.apply_push(Vector3::from(p.force), p.duration);
        }
        let action = history.act(policy)?;
        let out = env.step(&action)?;
        if out.done {
            termination = out.termination;
            break;
        }
        history.push(ShadowPolicy::token(&out.proprio, &out.target));
    }
    Ok((env.take_log(), termination))
}

/// Evaluates `cfg.episodes` seeded episodes; also returns each trajectory log.
pub fn evaluate(
    policy: &ShadowPolicy,
    model: &HumanoidModel,
    sim: &SimConfig,
    stream: &TargetStream,
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<Vec<TrajectoryRecord>>)> {
    if cfg.episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut env = HumanoidEnv::new(model.clone(), sim.clone())?;
    let dt = sim.policy_dt();
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut logs = Vec::with_capacity(cfg.episodes);
    for i in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let (log, term) = run_episode(policy, &mut env, stream.clone(), cfg.params.clone(), cfg.push.as_ref(), &mut rng)?;
        episodes.push(EpisodeReport::from_log(i, &log, term, cfg.push.as_ref(), &cfg.recovery, dt));
        logs.push(log);
    }
    let n = episodes.len() as f64;
    let mean_terms = REWARD_TERMS
        .iter()
        .enumerate()
        .map(|(j, name)| (name.to_string(), episodes.iter().map(|e| e.mean_terms[j]).sum::<f64>() / n))
        .collect();
    let report = EvalReport {
        seed: cfg.seed,
        mean_terms,
        mean_tracking_error: episodes.iter().map(|e| e.tracking_error).sum::<f64>() / n,
        fall_rate: episodes.iter().filter(|e| e.fell).count() as f64 / n,
        recovery_times: if cfg.push.is_some() {
            episodes.iter().map(|e| e.recovery_time).collect()
        } else {
            Vec::new()
        },
        episodes,
    };
    Ok((report, logs))
}
