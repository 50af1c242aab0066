//! Joint-order table and rest geometry of the human skeleton.
//!
//! Axes: x forward, y left, z up. The rest pose (all identity rotations)
//! stands upright with arms hanging at the sides and fingers extended, which
//! coincides with the humanoid's zero configuration.

use nalgebra::Vector3;

use crate::rotation::Rotation;

pub const NUM_BODY_JOINTS: usize = 22;
pub const NUM_HAND_JOINTS_PER_SIDE: usize = 15;
pub const NUM_HAND_JOINTS: usize = 2 * NUM_HAND_JOINTS_PER_SIDE;

/// Body joints in storage order. Index 0 (pelvis) carries the global orientation.
pub const BODY_JOINT_NAMES: [&str; NUM_BODY_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
];

pub const BODY_PARENTS: [Option<usize>; NUM_BODY_JOINTS] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
];

/// Per-side hand joints; left hand occupies hand slots 0..15, right hand 15..30.
pub const HAND_JOINT_NAMES: [&str; NUM_HAND_JOINTS_PER_SIDE] = [
    "index1", "index2", "index3", "middle1", "middle2", "middle3", "pinky1", "pinky2", "pinky3",
    "ring1", "ring2", "ring3", "thumb1", "thumb2", "thumb3",
];

pub const LEFT_ELBOW: usize = 18;
pub const RIGHT_ELBOW: usize = 19;
pub const LEFT_WRIST: usize = 20;
pub const RIGHT_WRIST: usize = 21;
pub const LEFT_ANKLE: usize = 7;
pub const RIGHT_ANKLE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn elbow(self) -> usize {
        [LEFT_ELBOW, RIGHT_ELBOW][self.index()]
    }

    pub fn wrist(self) -> usize {
        [LEFT_WRIST, RIGHT_WRIST][self.index()]
    }

    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Index into the 30-slot hand array for a named joint on one side.
pub fn hand_slot(side: Side, name: &str) -> Option<usize> {
    HAND_JOINT_NAMES
        .iter()
        .position(|n| *n == name)
        .map(|i| side.index() * NUM_HAND_JOINTS_PER_SIDE + i)
}

pub fn body_index(name: &str) -> Option<usize> {
    BODY_JOINT_NAMES.iter().position(|n| *n == name)
}

/// Rest offset of each body joint from its parent, meters.
pub fn body_offsets() -> [Vector3<f64>; NUM_BODY_JOINTS] {
    let v = Vector3::new;
    [
        v(0.0, 0.0, 0.0),
        v(0.0, 0.07, -0.09),
        v(0.0, -0.07, -0.09),
        v(0.0, 0.0, 0.11),
        v(0.0, 0.0, -0.40),
        v(0.0, 0.0, -0.40),
        v(0.0, 0.0, 0.13),
        v(0.0, 0.0, -0.40),
        v(0.0, 0.0, -0.40),
        v(0.0, 0.0, 0.05),
        v(0.12, 0.0, -0.07),
        v(0.12, 0.0, -0.07),
        v(0.0, 0.0, 0.22),
        v(0.0, 0.08, 0.15),
        v(0.0, -0.08, 0.15),
        v(0.0, 0.0, 0.09),
        v(0.0, 0.12, 0.0),
        v(0.0, -0.12, 0.0),
        v(0.0, 0.0, -0.26),
        v(0.0, 0.0, -0.26),
        v(0.0, 0.0, -0.25),
        v(0.0, 0.0, -0.25),
    ]
}

/// Height of the ankle joint above the ground in the rest pose.
pub const ANKLE_HEIGHT: f64 = 0.08;

/// Pelvis height above the ground in the rest pose.
pub fn rest_pelvis_height() -> f64 {
    let o = body_offsets();
    -(o[1].z + o[4].z + o[7].z) + ANKLE_HEIGHT
}

/// Hand joint offsets from their parent, per side, in the wrist frame.
pub fn hand_offsets(side: Side) -> [Vector3<f64>; NUM_HAND_JOINTS_PER_SIDE] {
    let s = side.sign();
    let v = Vector3::new;
    let seg2 = v(0.0, 0.0, -0.035);
    let seg3 = v(0.0, 0.0, -0.025);
    [
        v(0.03, 0.01 * s, -0.09),
        seg2,
        seg3,
        v(0.01, 0.01 * s, -0.095),
        seg2,
        seg3,
        v(-0.03, 0.01 * s, -0.08),
        seg2,
        seg3,
        v(-0.01, 0.01 * s, -0.09),
        seg2,
        seg3,
        v(0.03, -0.01 * s, -0.03),
        v(0.02, 0.0, -0.03),
        seg3,
    ]
}

fn hand_parent(local: usize) -> Option<usize> {
    // first joint of each finger hangs off the wrist
    if local % 3 == 0 {
        None
    } else {
        Some(local - 1)
    }
}

/// World-frame orientations and positions of every human joint for one pose.
#[derive(Clone, Debug)]
pub struct HumanSkeletonPose {
    pub body_rotations: Vec<Rotation>,
    pub body_positions: Vec<Vector3<f64>>,
    pub hand_rotations: Vec<Rotation>,
    pub hand_positions: Vec<Vector3<f64>>,
}

/// Chains local joint rotations down the human tree.
pub fn human_forward_kinematics(
    body: &[Rotation],
    hands: &[Rotation],
    root_translation: &Vector3<f64>,
) -> HumanSkeletonPose {
    let offsets = body_offsets();
    let mut rots: Vec<Rotation> = Vec::with_capacity(NUM_BODY_JOINTS);
    let mut pos: Vec<Vector3<f64>> = Vec::with_capacity(NUM_BODY_JOINTS);
    for j in 0..NUM_BODY_JOINTS {
        match BODY_PARENTS[j] {
            None => {
                rots.push(body[j]);
                pos.push(*root_translation);
            }
            Some(p) => {
                let gp = rots[p];
                pos.push(pos[p] + gp.rotate(&offsets[j]));
                rots.push(gp * body[j]);
            }
        }
    }
    let mut hand_rots = Vec::with_capacity(NUM_HAND_JOINTS);
    let mut hand_pos = Vec::with_capacity(NUM_HAND_JOINTS);
    for side in Side::BOTH {
        let wrist = side.wrist();
        let offs = hand_offsets(side);
        let base = side.index() * NUM_HAND_JOINTS_PER_SIDE;
        for local in 0..NUM_HAND_JOINTS_PER_SIDE {
            let (pr, pp) = match hand_parent(local) {
                None => (rots[wrist], pos[wrist]),
                Some(l) => (hand_rots[base + l], hand_pos[base + l]),
            };
            hand_pos.push(pp + pr.rotate(&offs[local]));
            hand_rots.push(pr * hands[base + local]);
        }
    }
    HumanSkeletonPose {
        body_rotations: rots,
        body_positions: pos,
        hand_rotations: hand_rots,
        hand_positions: hand_pos,
    }
}
