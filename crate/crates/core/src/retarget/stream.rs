//! 50 Hz whole-body target streams built from motion sequences.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{retarget_frame, RetargetMap};
use crate::error::{Error, Result};
use crate::model::{forward_kinematics, HumanoidModel, HumanoidPose, BODY, HANDS, WRISTS};
use crate::motion::{skeleton, MotionSequence};
use crate::rotation::{wrap_angle, yaw_of};

/// Low-level policy rate, Hz.
pub const POLICY_RATE: f64 = 50.0;
/// Length of [`TargetPose::to_vec`]: vx, vy, roll, pitch, vyaw, 19 joint angles.
pub const TARGET_DIM: usize = 24;

/// Conditioning signal for the shadowing policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPose {
    /// Heading-frame forward velocity, m/s.
    pub vx: f64,
    /// Heading-frame lateral velocity, m/s.
    pub vy: f64,
    pub roll: f64,
    pub pitch: f64,
    /// Yaw rate, rad/s.
    pub vyaw: f64,
    /// Body joint angles (19).
    pub q: Vec<f64>,
}

impl TargetPose {
    pub fn standing(q: Vec<f64>) -> Self {
        TargetPose {
            vx: 0.0,
            vy: 0.0,
            roll: 0.0,
            pitch: 0.0,
            vyaw: 0.0,
            q,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(5 + self.q.len());
        v.extend([self.vx, self.vy, self.roll, self.pitch, self.vyaw]);
        v.extend(&self.q);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WholeBodyTarget {
    pub pose: TargetPose,
    /// Left, right wrist angles.
    pub wrists: [f64; 2],
    /// 12 hand joint angles, model order (left hand first).
    pub hands: Vec<f64>,
    /// Lowest sole point above ground per foot, retargeted motion, meters.
    pub foot_height: [f64; 2],
    /// Foot-frame speed per foot, retargeted motion, m/s.
    pub foot_speed: [f64; 2],
}

impl WholeBodyTarget {
    /// All 33 joint targets in model order.
    pub fn joint_targets(&self) -> Vec<f64> {
        let mut q = self.pose.q.clone();
        q.extend(self.wrists);
        q.extend(&self.hands);
        q
    }

    /// Standing still at the given configuration with both feet planted.
    pub fn standing(q33: &[f64]) -> Self {
        WholeBodyTarget {
            pose: TargetPose::standing(q33[BODY].to_vec()),
            wrists: [q33[WRISTS.start], q33[WRISTS.start + 1]],
            hands: q33[HANDS].to_vec(),
            foot_height: [0.0; 2],
            foot_speed: [0.0; 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetStream {
    pub format: String,
    pub name: String,
    pub rate: f64,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub frames: Vec<WholeBodyTarget>,
}

pub const TARGET_STREAM_FORMAT: &str = "hp-targets-v1";

impl TargetStream {
    pub fn new(name: impl Into<String>, frames: Vec<WholeBodyTarget>) -> Self {
        TargetStream {
            format: TARGET_STREAM_FORMAT.into(),
            name: name.into(),
            rate: POLICY_RATE,
            config_hash: None,
            seed: None,
            frames,
        }
    }

    /// `n` identical standing frames.
    pub fn standing(name: impl Into<String>, q33: &[f64], n: usize) -> Self {
        Self::new(name, vec![WholeBodyTarget::standing(q33); n])
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.rate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactThresholds {
    /// Sole height below which a foot counts as planted, meters.
    pub height: f64,
    /// Foot speed below which a foot counts as planted, m/s.
    pub speed: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        ContactThresholds {
            height: 0.05,
            speed: 0.2,
        }
    }
}

/// Target foot contacts at frame `k`: low and slow.
pub fn target_contact(stream: &TargetStream, k: usize, th: &ContactThresholds) -> [bool; 2] {
    let f = &stream.frames[k.min(stream.frames.len() - 1)];
    [0, 1].map(|s| f.foot_height[s] < th.height && f.foot_speed[s] < th.speed)
}

fn central_difference<T>(xs: &[T], dt: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = xs.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (xs[1] - xs[0]) * (1.0 / dt)
            } else if i == n - 1 {
                (xs[n - 1] - xs[n - 2]) * (1.0 / dt)
            } else {
                (xs[i + 1] - xs[i - 1]) * (0.5 / dt)
            }
        })
        .collect()
}

/// Nearest-angle continuation of a wrapped angle series.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    for (i, a) in angles.iter().enumerate() {
        if i == 0 {
            out.push(*a);
        } else {
            let prev = out[i - 1];
            out.push(prev + wrap_angle(a - angles[i - 1]));
        }
    }
    out
}

/// Retargets every frame of `seq` (resampled to 50 Hz) into whole-body targets.
pub fn build_target_stream(seq: &MotionSequence, map: &RetargetMap, model: &HumanoidModel) -> Result<TargetStream> {
    let seq = seq.resample(POLICY_RATE)?;
    let n = seq.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, actual: n });
    }
    let dt = 1.0 / POLICY_RATE;
    let frames = seq.frames();

    let joints: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| retarget_frame(f, map, model))
        .collect::<Result<_>>()?;
    let yaw_wrapped: Vec<f64> = frames.iter().map(|f| yaw_of(&f.root_rotation())).collect();
    let yaw = unwrap_angles(&yaw_wrapped);
    let vyaw = central_difference(&yaw, dt);
    let root: Vec<Vector3<f64>> = frames.iter().map(|f| f.root_translation).collect();
    let v_world = central_difference(&root, dt);

    let height_shift = model.standing_pose().base_position.z - skeleton::rest_pelvis_height();
    let mut foot_pos = Vec::with_capacity(n);
    let mut foot_height = Vec::with_capacity(n);
    for (f, q) in frames.iter().zip(&joints) {
        let pose = HumanoidPose {
            base_position: f.root_translation + Vector3::new(0.0, 0.0, height_shift),
            base_rotation: f.root_rotation(),
            q: q.clone(),
        };
        let fk = forward_kinematics(model, &pose)?;
        let pts = model.contact_points(&fk);
        foot_height.push(pts.map(|p| p.iter().map(|v| v.z).fold(f64::INFINITY, f64::min)));
        foot_pos.push(fk.foot_positions(model));
    }
    let left: Vec<Vector3<f64>> = foot_pos.iter().map(|p| p[0]).collect();
    let right: Vec<Vector3<f64>> = foot_pos.iter().map(|p| p[1]).collect();
    let foot_vel = [central_difference(&left, dt), central_difference(&right, dt)];

    let out = (0..n)
        .map(|i| {
            let (roll, pitch, _) = frames[i].root_rotation().to_euler();
            let (s, c) = yaw_wrapped[i].sin_cos();
            let v = v_world[i];
            let q = &joints[i];
            WholeBodyTarget {
                pose: TargetPose {
                    vx: c * v.x + s * v.y,
                    vy: -s * v.x + c * v.y,
                    roll,
                    pitch,
                    vyaw: vyaw[i],
                    q: q[BODY].to_vec(),
                },
                wrists: [q[WRISTS.start], q[WRISTS.start + 1]],
                hands: q[HANDS].to_vec(),
                foot_height: foot_height[i],
                foot_speed: [foot_vel[0][i].norm(), foot_vel[1][i].norm()],
            }
        })
        .collect();
    Ok(TargetStream::new(seq.name.clone(), out))
}

pub fn save_target_stream(stream: &TargetStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(stream).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_target_stream(path: impl AsRef<Path>) -> Result<TargetStream> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stream: TargetStream = serde_json::from_str(&text).map_err(|e| Error::Parse {
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if stream.format != TARGET_STREAM_FORMAT {
        return Err(Error::Parse {
            offset: 0,
            message: format!("unsupported target stream format `{}`", stream.format),
        });
    }
    if stream.frames.is_empty() {
        return Err(Error::Empty("target stream has no frames".into()));
    }
    Ok(stream)
}

pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::HumanPoseFrame;
    use crate::rotation::Rotation;

    fn straight_line(yaw: f64, speed: f64, n: usize) -> MotionSequence {
        let frames = (0..n)
            .map(|i| {
                let mut f = HumanPoseFrame::rest(0.0);
                f.set_root_rotation(Rotation::rz(yaw));
                f.root_translation.x = speed * i as f64 / POLICY_RATE;
                f
            })
            .collect();
        MotionSequence::from_poses(frames, POLICY_RATE, "line").unwrap()
    }

    fn setup() -> (HumanoidModel, RetargetMap) {
        let m = HumanoidModel::default_model();
        let map = RetargetMap::default_map(&m).unwrap();
        (m, map)
    }

    #[test]
    fn stationary_sequence() {
        let (m, map) = setup();
        let s = build_target_stream(&straight_line(0.0, 0.0, 20), &map, &m).unwrap();
        assert_eq!(s.len(), 20);
        for f in &s.frames {
            assert_eq!((f.pose.vx, f.pose.vy, f.pose.vyaw), (0.0, 0.0, 0.0));
            assert_eq!(f.pose.q, s.frames[0].pose.q);
            assert!(f.foot_height.iter().all(|h| h.abs() < 1e-9));
        }
        let th = ContactThresholds::default();
        assert_eq!(target_contact(&s, 5, &th), [true, true]);
    }

    #[test]
    fn heading_frame_velocity() {
        let (m, map) = setup();
        let s = build_target_stream(&straight_line(0.0, 1.0, 30), &map, &m).unwrap();
        for f in &s.frames {
            assert!((f.pose.vx - 1.0).abs() < 1e-6 && f.pose.vy.abs() < 1e-6);
        }
        let s = build_target_stream(&straight_line(std::f64::consts::FRAC_PI_2, 1.0, 30), &map, &m).unwrap();
        for f in &s.frames {
            assert!(f.pose.vx.abs() < 1e-6 && (f.pose.vy + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn yaw_rate_across_wraparound() {
        let (m, map) = setup();
        let frames = (0..40)
            .map(|i| {
                let mut f = HumanPoseFrame::rest(0.0);
                f.set_root_rotation(Rotation::rz(3.0 + 0.05 * i as f64));
                f
            })
            .collect();
        let seq = MotionSequence::from_poses(frames, POLICY_RATE, "spin").unwrap();
        let s = build_target_stream(&seq, &map, &m).unwrap();
        for f in &s.frames {
            assert!((f.pose.vyaw - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short() {
        let (m, map) = setup();
        let seq = straight_line(0.0, 0.0, 2);
        assert!(matches!(build_target_stream(&seq, &map, &m), Err(Error::TooShort { .. })));
    }

    #[test]
    fn airborne_frame_has_no_contact() {
        let (m, map) = setup();
        let frames = (0..10)
            .map(|i| {
                let mut f = HumanPoseFrame::rest(0.0);
                // parabolic hop peaking at frame 5, 0.3 m
                let t = i as f64 - 5.0;
                f.root_translation.z += 0.3 - 0.012 * t * t;
                f
            })
            .collect();
        let seq = MotionSequence::from_poses(frames, POLICY_RATE, "hop").unwrap();
        let s = build_target_stream(&seq, &map, &m).unwrap();
        let th = ContactThresholds::default();
        assert_eq!(target_contact(&s, 5, &th), [false, false]);
    }

    #[test]
    fn unwrap_continuation() {
        let u = unwrap_angles(&[3.0, -3.0, -2.9]);
        assert!((u[1] - (2.0 * std::f64::consts::PI - 3.0)).abs() < 1e-12);
        assert!(u[2] > u[1]);
    }
}
