//! Tracking rewards and termination checks.

use serde::{Deserialize, Serialize};

use super::state::SimState;
use crate::retarget::TargetPose;

/// A foot counts as loaded above this normal force, N.
pub const CONTACT_FORCE_THRESHOLD: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub xy_vel: f64,
    pub yaw_vel: f64,
    pub joint_pos: f64,
    pub roll_pitch: f64,
    pub energy: f64,
    pub feet_contact: f64,
    pub feet_slip: f64,
    pub alive: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            xy_vel: 1.0,
            yaw_vel: 0.5,
            joint_pos: 0.5,
            roll_pitch: 0.5,
            energy: 1e-5,
            feet_contact: 0.5,
            feet_slip: 0.5,
            alive: 0.2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub xy_vel: f64,
    pub yaw_vel: f64,
    pub joint_pos: f64,
    pub roll_pitch: f64,
    pub energy: f64,
    pub feet_contact: f64,
    pub feet_slip: f64,
    pub alive: f64,
    pub total: f64,
}

pub const REWARD_TERMS: [&str; 8] = [
    "xy_vel",
    "yaw_vel",
    "joint_pos",
    "roll_pitch",
    "energy",
    "feet_contact",
    "feet_slip",
    "alive",
];

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 8] {
        [
            self.xy_vel,
            self.yaw_vel,
            self.joint_pos,
            self.roll_pitch,
            self.energy,
            self.feet_contact,
            self.feet_slip,
            self.alive,
        ]
    }

    /// Recomputes `total` from the terms.
    pub fn weighted(mut self, w: &RewardWeights) -> Self {
        let ws = [
            w.xy_vel,
            w.yaw_vel,
            w.joint_pos,
            w.roll_pitch,
            w.energy,
            w.feet_contact,
            w.feet_slip,
            w.alive,
        ];
        self.total = self.terms().iter().zip(ws).map(|(t, w)| t * w).sum();
        self
    }

    /// Replaces the alive term (0 on a failing step) and reweights.
    pub fn with_alive(mut self, alive: f64, w: &RewardWeights) -> Self {
        self.alive = alive;
        self.weighted(w)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Every tracking term against `target`; `target_contact` is c^tg per foot.
pub fn compute_rewards(
    state: &SimState,
    target: &TargetPose,
    target_contact: [bool; 2],
    weights: &RewardWeights,
) -> RewardBreakdown {
    let (vx, vy) = state.heading_velocity();
    let (roll, pitch, _) = state.roll_pitch_yaw();
    let energy: f64 = state
        .body_tau()
        .iter()
        .zip(state.body_qd())
        .map(|(t, v)| (t * v) * (t * v))
        .sum();
    let matches = (0..2)
        .filter(|&f| (state.contacts[f].normal_force > CONTACT_FORCE_THRESHOLD) == target_contact[f])
        .count();
    let slip: f64 = state
        .contacts
        .iter()
        .filter(|c| c.normal_force > CONTACT_FORCE_THRESHOLD)
        .map(|c| c.planar_speed().powi(2))
        .sum();
    RewardBreakdown {
        xy_vel: (-(vx - target.vx).hypot(vy - target.vy)).exp(),
        yaw_vel: (-(state.yaw_rate() - target.vyaw).abs()).exp(),
        joint_pos: -squared_distance(state.body_q(), &target.q),
        roll_pitch: -squared_distance(&[roll, pitch], &[target.roll, target.pitch]),
        energy: -energy,
        feet_contact: matches as f64 / 2.0,
        feet_slip: -slip.sqrt(),
        alive: 1.0,
        total: 0.0,
    }
    .weighted(weights)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationLimits {
    pub max_roll: f64,
    pub max_pitch: f64,
    pub min_base_height: f64,
    /// Episode horizon in policy steps.
    pub horizon_steps: usize,
}

impl Default for TerminationLimits {
    fn default() -> Self {
        TerminationLimits {
            max_roll: 1.0,
            max_pitch: 1.0,
            min_base_height: 0.3,
            horizon_steps: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Roll,
    Pitch,
    Height,
    /// Tracking error bound exceeded (toy task).
    Tracking,
    Timeout,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        self != Termination::Timeout
    }
}

/// Why the episode ends at `state`, if it does; `policy_dt` converts the horizon to seconds.
pub fn termination_reason(state: &SimState, limits: &TerminationLimits, policy_dt: f64) -> Option<Termination> {
    let (roll, pitch, _) = state.roll_pitch_yaw();
    if roll.abs() > limits.max_roll {
        Some(Termination::Roll)
    } else if pitch.abs() > limits.max_pitch {
        Some(Termination::Pitch)
    } else if state.base_position.z < limits.min_base_height {
        Some(Termination::Height)
    } else if state.time >= limits.horizon_steps as f64 * policy_dt - 1e-9 {
        Some(Termination::Timeout)
    } else {
        None
    }
}

pub fn check_termination(state: &SimState, limits: &TerminationLimits, policy_dt: f64) -> bool {
    termination_reason(state, limits, policy_dt).is_some()
}
