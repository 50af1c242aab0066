//! Two-joint tracking task for checking the learning signal quickly.
//!
//! Each joint follows a sinusoidal target; the episode fails as soon as
//! either joint is more than `max_error` away from it. Rewards use the same
//! terms as the humanoid, with the base-related terms at their ideal values.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pd_torque, Environment, EnvironmentDims, PdConfig, RewardBreakdown, RewardWeights, StepOutcome, Termination};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    pub max_error: f64,
    pub horizon_steps: usize,
    pub inertia: f64,
    pub damping: f64,
    pub kp: f64,
    pub torque_limit: f64,
    pub reset_noise: f64,
    pub weights: RewardWeights,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            amplitude: 0.8,
            frequency: 0.5,
            max_error: 0.5,
            horizon_steps: 200,
            inertia: 0.05,
            damping: 0.05,
            kp: 20.0,
            torque_limit: 10.0,
            reset_noise: 0.05,
            weights: RewardWeights::default(),
        }
    }
}

pub const TOY_JOINTS: usize = 2;
const DT: f64 = 0.001;
const SUBSTEPS: usize = 20;

pub struct ToyTrackingEnv {
    cfg: ToyConfig,
    pd: PdConfig,
    q: [f64; 2],
    qd: [f64; 2],
    tau: [f64; 2],
    last_action: [f64; 2],
    phase: [f64; 2],
    step: usize,
    done: bool,
}

impl ToyTrackingEnv {
    pub fn new(cfg: ToyConfig) -> Result<Self> {
        if !(cfg.inertia > 0.0 && cfg.max_error > 0.0 && cfg.horizon_steps > 0) {
            return Err(Error::Config("toy inertia, max_error and horizon must be positive".into()));
        }
        let kd = (2.0 * (cfg.kp * cfg.inertia).sqrt() - cfg.damping).max(0.0);
        let pd = PdConfig {
            kp: vec![cfg.kp; TOY_JOINTS],
            kd: vec![kd; TOY_JOINTS],
            torque_limit: vec![cfg.torque_limit; TOY_JOINTS],
            substeps: SUBSTEPS,
        };
        Ok(ToyTrackingEnv {
            cfg,
            pd,
            q: [0.0; 2],
            qd: [0.0; 2],
            tau: [0.0; 2],
            last_action: [0.0; 2],
            phase: [0.0; 2],
            step: 0,
            done: true,
        })
    }

    fn time(&self) -> f64 {
        self.step as f64 * DT * SUBSTEPS as f64
    }

    fn target_at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = std::f64::consts::TAU * self.cfg.frequency;
        let a = self.cfg.amplitude;
        (
            self.phase.map(|p| a * (w * t + p).sin()),
            self.phase.map(|p| a * w * (w * t + p).cos()),
        )
    }

    fn tokens(&self) -> (Vec<f64>, Vec<f64>) {
        let (q_tg, qd_tg) = self.target_at(self.time());
        let mut proprio = Vec::with_capacity(6);
        proprio.extend(self.q);
        proprio.extend(self.qd);
        proprio.extend(self.last_action);
        let mut target = Vec::with_capacity(4);
        target.extend(q_tg);
        target.extend(qd_tg);
        (proprio, target)
    }
}

impl Environment for ToyTrackingEnv {
    fn dims(&self) -> EnvironmentDims {
        EnvironmentDims {
            proprio: 6,
            target: 4,
            action: TOY_JOINTS,
        }
    }

    fn reset_episode(&mut self, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        self.phase = [rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU)];
        self.step = 0;
        let (q_tg, qd_tg) = self.target_at(0.0);
        let h = self.cfg.reset_noise;
        for j in 0..TOY_JOINTS {
            self.q[j] = q_tg[j] + if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 };
            self.qd[j] = qd_tg[j];
        }
        self.tau = [0.0; 2];
        self.last_action = q_tg;
        self.done = false;
        Ok(self.tokens())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::NotReset);
        }
        if action.len() != TOY_JOINTS {
            return Err(Error::dim(TOY_JOINTS, action.len(), "toy action"));
        }
        let (q_tg_now, _) = self.target_at(self.time());
        for _ in 0..SUBSTEPS {
            let tau = pd_torque(&self.pd, action, &self.q, &self.qd, 1.0)?;
            for j in 0..TOY_JOINTS {
                let acc = (tau[j] - self.cfg.damping * self.qd[j]) / self.cfg.inertia;
                self.qd[j] += acc * DT;
                self.q[j] += self.qd[j] * DT;
                self.tau[j] = tau[j];
            }
        }
        self.last_action = [action[0], action[1]];
        self.step += 1;
        let fault = !(self.q.iter().chain(&self.qd).all(|v| v.is_finite()));
        let err2: f64 = (0..TOY_JOINTS).map(|j| (self.q[j] - q_tg_now[j]).powi(2)).sum();
        let max_err = (0..TOY_JOINTS)
            .map(|j| (self.q[j] - q_tg_now[j]).abs())
            .fold(0.0, f64::max);
        let energy: f64 = (0..TOY_JOINTS).map(|j| (self.tau[j] * self.qd[j]).powi(2)).sum();
        let failed = fault || !(max_err <= self.cfg.max_error);
        let timeout = self.step >= self.cfg.horizon_steps;
        let reward = RewardBreakdown {
            xy_vel: 1.0,
            yaw_vel: 1.0,
            joint_pos: -err2,
            roll_pitch: 0.0,
            energy: -energy,
            feet_contact: 1.0,
            feet_slip: 0.0,
            alive: if failed { 0.0 } else { 1.0 },
            total: 0.0,
        }
        .weighted(&self.cfg.weights);
        self.done = failed || timeout;
        let (proprio, target) = self.tokens();
        Ok(StepOutcome {
            proprio,
            target,
            reward,
            done: self.done,
            termination: if failed {
                Some(Termination::Tracking)
            } else if timeout {
                Some(Termination::Timeout)
            } else {
                None
            },
            fault,
            stream_end: false,
        })
    }
}
