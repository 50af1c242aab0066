//! Simulator state snapshot.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::BODY;
use crate::rotation::Rotation;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FootContact {
    pub in_contact: bool,
    /// Sum of normal forces over the sole points, N.
    pub normal_force: f64,
    /// World-frame planar velocity of the foot frame, m/s.
    pub planar_velocity: [f64; 2],
}

impl FootContact {
    pub fn planar_speed(&self) -> f64 {
        self.planar_velocity[0].hypot(self.planar_velocity[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub base_position: Vector3<f64>,
    pub base_rotation: Rotation,
    /// World frame, m/s.
    pub base_linear_velocity: Vector3<f64>,
    /// World frame, rad/s.
    pub base_angular_velocity: Vector3<f64>,
    /// All joints in model order; the policy acts on the first 19.
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    /// Actuator torque of the last 1 kHz tick, N m.
    pub tau: Vec<f64>,
    /// Left, right.
    pub contacts: [FootContact; 2],
    /// Last body setpoint submitted by the policy.
    pub last_action: Vec<f64>,
    pub time: f64,
}

impl SimState {
    pub fn roll_pitch_yaw(&self) -> (f64, f64, f64) {
        self.base_rotation.to_euler()
    }

    /// Base planar velocity in the yaw-only heading frame.
    pub fn heading_velocity(&self) -> (f64, f64) {
        let (_, _, yaw) = self.roll_pitch_yaw();
        let (s, c) = yaw.sin_cos();
        let v = self.base_linear_velocity;
        (c * v.x + s * v.y, -s * v.x + c * v.y)
    }

    pub fn yaw_rate(&self) -> f64 {
        self.base_angular_velocity.z
    }

    /// Angular velocity in the base frame.
    pub fn local_angular_velocity(&self) -> Vector3<f64> {
        self.base_rotation.inverse().rotate(&self.base_angular_velocity)
    }

    pub fn body_q(&self) -> &[f64] {
        &self.q[BODY]
    }

    pub fn body_qd(&self) -> &[f64] {
        &self.qd[BODY]
    }

    pub fn body_tau(&self) -> &[f64] {
        &self.tau[BODY]
    }

    pub fn is_finite(&self) -> bool {
        self.base_position.iter().all(|v| v.is_finite())
            && self.base_rotation.quaternion().iter().all(|v| v.is_finite())
            && self.base_linear_velocity.iter().all(|v| v.is_finite())
            && self.base_angular_velocity.iter().all(|v| v.is_finite())
            && self.q.iter().chain(&self.qd).chain(&self.tau).all(|v| v.is_finite())
    }

    /// Proprioception: roll, pitch, base-frame angular velocity, body q,
    /// body q̇ and the last action (62 values for the shipped model).
    pub fn proprioception(&self) -> Vec<f64> {
        let (roll, pitch, _) = self.roll_pitch_yaw();
        let w = self.local_angular_velocity();
        let mut p = Vec::with_capacity(5 + 3 * BODY.len());
        p.extend([roll, pitch, w.x, w.y, w.z]);
        p.extend(self.body_q());
        p.extend(self.body_qd());
        p.extend(&self.last_action);
        p
    }
}

/// Length of [`SimState::proprioception`].
pub const PROPRIO_DIM: usize = 5 + 3 * 19;
