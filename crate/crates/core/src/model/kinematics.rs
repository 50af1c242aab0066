use nalgebra::Vector3;

use super::HumanoidModel;
use crate::error::{Error, Result};
use crate::rotation::Rotation;

/// Floating-base configuration of the humanoid.
#[derive(Clone, Debug, PartialEq)]
pub struct HumanoidPose {
    pub base_position: Vector3<f64>,
    pub base_rotation: Rotation,
    /// Joint angles in model order.
    pub q: Vec<f64>,
}

impl HumanoidPose {
    pub fn zero(model: &HumanoidModel) -> Self {
        HumanoidPose {
            base_position: Vector3::zeros(),
            base_rotation: Rotation::identity(),
            q: vec![0.0; model.num_joints()],
        }
    }
}

/// World pose of every link, indexed like `HumanoidModel::links`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkTransforms {
    pub positions: Vec<Vector3<f64>>,
    pub rotations: Vec<Rotation>,
}

impl LinkTransforms {
    pub fn link(&self, index: usize) -> (Vector3<f64>, Rotation) {
        (self.positions[index], self.rotations[index])
    }

    pub fn foot_positions(&self, model: &HumanoidModel) -> [Vector3<f64>; 2] {
        model.feet.map(|f| self.positions[f])
    }

    pub fn hand_positions(&self, model: &HumanoidModel) -> [Vector3<f64>; 2] {
        model.end_effectors.map(|f| self.positions[f])
    }
}

/// Child frame = parent frame ∘ fixed offset ∘ rotation about the joint axis by q.
pub fn forward_kinematics(model: &HumanoidModel, pose: &HumanoidPose) -> Result<LinkTransforms> {
    if pose.q.len() != model.num_joints() {
        return Err(Error::dim(model.num_joints(), pose.q.len(), "joint vector"));
    }
    let n = model.links.len();
    let mut positions = vec![Vector3::zeros(); n];
    let mut rotations = vec![Rotation::identity(); n];
    positions[model.root_link] = pose.base_position;
    rotations[model.root_link] = pose.base_rotation;
    for (j, joint) in model.joints.iter().enumerate() {
        let pr = rotations[joint.parent_link];
        positions[joint.child_link] = positions[joint.parent_link] + pr.rotate(&joint.origin);
        rotations[joint.child_link] = pr * Rotation::from_axis_angle(&joint.axis, pose.q[j]);
    }
    Ok(LinkTransforms {
        positions,
        rotations,
    })
}
