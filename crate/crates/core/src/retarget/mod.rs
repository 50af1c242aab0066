//! Human pose → humanoid target pose.
//!
//! Body joints copy Euler components of the matching human joints, fingers
//! copy the middle-joint rotation, and each wrist angle is the twist of the
//! hand relative to the forearm about the wrist axis.

mod map;
mod stream;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::{HumanoidModel, BODY, HANDS, NUM_BODY_JOINTS, WRISTS};
use crate::motion::{HumanPoseFrame, Side};
use crate::rotation::{relative_rotation, Rotation};

pub use map::{EulerComponent, MapEntry, RetargetMap};
pub use stream::{
    build_target_stream, load_target_stream, save_target_stream, target_contact, ContactThresholds,
    TargetPose, TargetStream, WholeBodyTarget, POLICY_RATE, TARGET_DIM,
};

/// Body joint angles (19) for one human frame, clamped to limits.
pub fn retarget_body(frame: &HumanPoseFrame, map: &RetargetMap, model: &HumanoidModel) -> Result<Vec<f64>> {
    frame.check_dims(0)?;
    let mut q = vec![0.0; NUM_BODY_JOINTS];
    let mut covered = [false; NUM_BODY_JOINTS];
    for e in &map.body {
        if !BODY.contains(&e.target) {
            return Err(Error::Config(format!("body entry targets non-body joint {}", e.target)));
        }
        q[e.target] = e.apply(frame.body[e.source].to_euler());
        covered[e.target] = true;
    }
    let missing: Vec<String> = covered
        .iter()
        .enumerate()
        .filter(|(_, c)| !**c)
        .map(|(j, _)| model.joints[j].name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteMap { missing });
    }
    Ok(model.clamp_to_limits(&q))
}

/// Copied (unclamped) finger angles for one hand, in model order.
pub fn hand_components(frame: &HumanPoseFrame, side: Side, map: &RetargetMap) -> Vec<f64> {
    map.hands[side.index()]
        .iter()
        .map(|e| e.apply(frame.hands[e.source].to_euler()))
        .collect()
}

/// Six hand joint angles for one side, clamped to limits.
pub fn retarget_hand(frame: &HumanPoseFrame, side: Side, map: &RetargetMap, model: &HumanoidModel) -> Result<Vec<f64>> {
    frame.check_dims(0)?;
    let entries = &map.hands[side.index()];
    let mut out = hand_components(frame, side, map);
    let targets: Vec<usize> = entries.iter().map(|e| e.target).collect();
    model.clamp_indexed(&mut out, &targets);
    Ok(out)
}

/// Signed twist of `relative_rotation(forearm, hand)` about the wrist axis.
pub fn compute_wrist_angle(forearm: &Rotation, hand: &Rotation, axis: &Vector3<f64>) -> f64 {
    relative_rotation(forearm, hand).twist_angle(axis)
}

/// Both wrist angles for a frame, from global forearm and hand orientations.
pub fn retarget_wrists(frame: &HumanPoseFrame, model: &HumanoidModel) -> [f64; 2] {
    let pose = frame.skeleton_pose();
    Side::BOTH.map(|side| {
        let j = WRISTS.start + side.index();
        let joint = &model.joints[j];
        let forearm = pose.body_rotations[side.elbow()];
        let hand = pose.body_rotations[side.wrist()];
        compute_wrist_angle(&forearm, &hand, &joint.axis).clamp(joint.lower, joint.upper)
    })
}

/// All 33 joint angles for a frame in model order.
pub fn retarget_frame(frame: &HumanPoseFrame, map: &RetargetMap, model: &HumanoidModel) -> Result<Vec<f64>> {
    let mut q = retarget_body(frame, map, model)?;
    q.extend(retarget_wrists(frame, model));
    let mut hands = vec![0.0; HANDS.len()];
    for side in Side::BOTH {
        let vals = retarget_hand(frame, side, map, model)?;
        for (e, v) in map.hands[side.index()].iter().zip(vals) {
            hands[e.target - HANDS.start] = v;
        }
    }
    q.extend(hands);
    Ok(q)
}

/// All 33 joint angles in model order before limit clipping.
pub fn retarget_frame_unclamped(frame: &HumanPoseFrame, map: &RetargetMap, model: &HumanoidModel) -> Result<Vec<f64>> {
    frame.check_dims(0)?;
    let mut q = vec![0.0; model.num_joints()];
    for e in &map.body {
        q[e.target] = e.apply(frame.body[e.source].to_euler());
    }
    let pose = frame.skeleton_pose();
    for side in Side::BOTH {
        let j = WRISTS.start + side.index();
        let forearm = pose.body_rotations[side.elbow()];
        let hand = pose.body_rotations[side.wrist()];
        q[j] = compute_wrist_angle(&forearm, &hand, &model.joints[j].axis);
        for (e, v) in map.hands[side.index()].iter().zip(hand_components(frame, side, map)) {
            q[e.target] = v;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_kinematics, HumanoidPose};
    use crate::motion::skeleton;
    use rand::SeedableRng;

    fn setup() -> (HumanoidModel, RetargetMap) {
        let m = HumanoidModel::default_model();
        let map = RetargetMap::default_map(&m).unwrap();
        (m, map)
    }

    #[test]
    fn unclamped_frame_clips_to_retargeted_frame() {
        let (m, map) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = crate::synth::random_frame(&mut rng, 2.5);
            let raw = retarget_frame_unclamped(&f, &map, &m).unwrap();
            assert_eq!(m.clamp_to_limits(&raw), retarget_frame(&f, &map, &m).unwrap());
        }
    }

    #[test]
    fn zero_pose_maps_to_zero() {
        let (m, map) = setup();
        let f = HumanPoseFrame::rest(0.0);
        assert_eq!(retarget_body(&f, &map, &m).unwrap(), vec![0.0; 19]);
        assert_eq!(retarget_hand(&f, Side::Left, &map, &m).unwrap(), vec![0.0; 6]);
        assert_eq!(retarget_frame(&f, &map, &m).unwrap(), vec![0.0; 33]);
    }

    #[test]
    fn knee_flexion_copies_and_matches_foot_drop() {
        let (m, map) = setup();
        let mut f = HumanPoseFrame::rest(0.0);
        f.body[skeleton::body_index("left_knee").unwrap()] = Rotation::ry(0.7);
        let q = retarget_body(&f, &map, &m).unwrap();
        let knee = m.joint_index("left_knee").unwrap();
        assert!((q[knee] - 0.7).abs() < 1e-12);

        // foot height drop relative to shin length, both skeletons
        let rest = HumanPoseFrame::rest(0.0).skeleton_pose();
        let bent = f.skeleton_pose();
        let human_drop = (bent.body_positions[skeleton::LEFT_ANKLE].z
            - rest.body_positions[skeleton::LEFT_ANKLE].z)
            / skeleton::body_offsets()[skeleton::LEFT_ANKLE].norm();
        let mut pose = HumanoidPose::zero(&m);
        let fk0 = forward_kinematics(&m, &pose).unwrap();
        pose.q[..19].copy_from_slice(&q);
        let fk1 = forward_kinematics(&m, &pose).unwrap();
        let shin = m.joints[m.joint_index("left_ankle").unwrap()].origin.norm();
        let robot_drop = (fk1.positions[m.feet[0]].z - fk0.positions[m.feet[0]].z) / shin;
        assert!(((human_drop - robot_drop) / human_drop).abs() < 0.05);
    }

    #[test]
    fn out_of_limit_pose_is_clamped() {
        let (m, map) = setup();
        let ankle = m.joint_index("left_ankle").unwrap();
        let hi = m.joints[ankle].upper;
        let mut f = HumanPoseFrame::rest(0.0);
        f.body[skeleton::LEFT_ANKLE] = Rotation::ry(hi + 0.4);
        let q = retarget_body(&f, &map, &m).unwrap();
        assert_eq!(q[ankle], hi);
    }

    #[test]
    fn finger_copy_and_fist() {
        let (m, map) = setup();
        let mut f = HumanPoseFrame::rest(0.0);
        f.hands[skeleton::hand_slot(Side::Left, "index2").unwrap()] = Rotation::ry(1.0);
        let h = retarget_hand(&f, Side::Left, &map, &m).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12);

        // fist: every copied component beyond its limit
        let mut fist = HumanPoseFrame::rest(0.0);
        for slot in 0..skeleton::NUM_HAND_JOINTS {
            fist.hands[slot] = Rotation::from_euler(1.45, 1.5, 0.0).unwrap();
        }
        let raw = hand_components(&fist, Side::Right, &map);
        let clamped = retarget_hand(&fist, Side::Right, &map, &m).unwrap();
        for ((e, r), c) in map.hands[1].iter().zip(&raw).zip(&clamped) {
            let j = &m.joints[e.target];
            assert!(*r > j.upper);
            assert_eq!(*c, j.upper);
        }
    }

    #[test]
    fn wrist_twist_cases() {
        let z = Vector3::z();
        let fore = Rotation::from_euler(0.2, -0.3, 0.9).unwrap();
        assert!(compute_wrist_angle(&fore, &fore, &z).abs() < 1e-12);
        let hand = fore * Rotation::rz(0.6);
        assert!((compute_wrist_angle(&fore, &hand, &z) - 0.6).abs() < 1e-12);
        let swung = fore * Rotation::rx(0.8);
        assert!(compute_wrist_angle(&fore, &swung, &z).abs() < 1e-12);
    }

    #[test]
    fn wrist_from_frame() {
        let (m, _) = setup();
        let mut f = HumanPoseFrame::rest(0.0);
        f.body[skeleton::LEFT_WRIST] = Rotation::rz(0.5);
        f.body[skeleton::RIGHT_WRIST] = Rotation::rx(0.5);
        let w = retarget_wrists(&f, &m);
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!(w[1].abs() < 1e-12);
    }
}
