//! Human pose frames, motion sequences and resampling.

pub mod format;
pub mod skeleton;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::rotation::Rotation;

pub use format::{load_motion, read_motion, save_motion, write_motion, MOTION_MAGIC};
pub use skeleton::{Side, NUM_BODY_JOINTS, NUM_HAND_JOINTS};

/// One captured human pose.
///
/// `body[0]` is the pelvis; its rotation is the global orientation of the
/// body, so the root rotation is not stored twice.
#[derive(Clone, Debug, PartialEq)]
pub struct HumanPoseFrame {
    pub body: Vec<Rotation>,
    pub hands: Vec<Rotation>,
    pub root_translation: Vector3<f64>,
    pub timestamp: f64,
}

impl HumanPoseFrame {
    /// Rest pose at the given time.
    pub fn rest(timestamp: f64) -> Self {
        HumanPoseFrame {
            body: vec![Rotation::identity(); NUM_BODY_JOINTS],
            hands: vec![Rotation::identity(); NUM_HAND_JOINTS],
            root_translation: Vector3::new(0.0, 0.0, skeleton::rest_pelvis_height()),
            timestamp,
        }
    }

    pub fn root_rotation(&self) -> Rotation {
        self.body[0]
    }

    pub fn set_root_rotation(&mut self, r: Rotation) {
        self.body[0] = r;
    }

    pub fn hand(&self, side: Side) -> &[Rotation] {
        let n = skeleton::NUM_HAND_JOINTS_PER_SIDE;
        &self.hands[side.index() * n..(side.index() + 1) * n]
    }

    pub(crate) fn check_dims(&self, frame: usize) -> Result<()> {
        if self.body.len() != NUM_BODY_JOINTS {
            return Err(Error::FrameDimension {
                frame,
                message: format!(
                    "expected {NUM_BODY_JOINTS} body joints, got {}",
                    self.body.len()
                ),
            });
        }
        if self.hands.len() != NUM_HAND_JOINTS {
            return Err(Error::FrameDimension {
                frame,
                message: format!(
                    "expected {NUM_HAND_JOINTS} hand joints, got {}",
                    self.hands.len()
                ),
            });
        }
        Ok(())
    }

    pub fn skeleton_pose(&self) -> skeleton::HumanSkeletonPose {
        skeleton::human_forward_kinematics(&self.body, &self.hands, &self.root_translation)
    }

    fn interpolate(&self, other: &HumanPoseFrame, w: f64, timestamp: f64) -> HumanPoseFrame {
        HumanPoseFrame {
            body: self
                .body
                .iter()
                .zip(&other.body)
                .map(|(a, b)| a.slerp(b, w))
                .collect(),
            hands: self
                .hands
                .iter()
                .zip(&other.hands)
                .map(|(a, b)| a.slerp(b, w))
                .collect(),
            root_translation: self.root_translation.lerp(&other.root_translation, w),
            timestamp,
        }
    }

    fn quantized(&self) -> HumanPoseFrame {
        let q = |r: &Rotation| {
            let c = r.quaternion().map(|v| v as f32 as f64);
            Rotation::from_quaternion_raw(c)
        };
        HumanPoseFrame {
            body: self.body.iter().map(q).collect(),
            hands: self.hands.iter().map(q).collect(),
            root_translation: self.root_translation.map(|v| v as f32 as f64),
            timestamp: self.timestamp,
        }
    }
}

/// A timed series of human poses.
#[derive(Clone, Debug)]
pub struct MotionSequence {
    frames: Vec<HumanPoseFrame>,
    fps: f64,
    pub name: String,
    /// Provenance tag. Not persisted by the motion file format.
    pub source: String,
}

impl MotionSequence {
    pub fn new(
        frames: Vec<HumanPoseFrame>,
        fps: f64,
        name: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if frames.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                actual: frames.len(),
            });
        }
        for (i, f) in frames.iter().enumerate() {
            f.check_dims(i)?;
            if !f.timestamp.is_finite() || f.root_translation.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("frame {i}")));
            }
            if i > 0 && f.timestamp <= frames[i - 1].timestamp {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must be strictly increasing (frame {i})"
                )));
            }
        }
        Ok(MotionSequence {
            frames,
            fps,
            name: name.into(),
            source: source.into(),
        })
    }

    /// Builds a sequence with timestamps `start + i / fps`.
    pub fn from_poses(
        mut frames: Vec<HumanPoseFrame>,
        fps: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        for (i, f) in frames.iter_mut().enumerate() {
            f.timestamp = i as f64 / fps;
        }
        Self::new(frames, fps, name, "synthetic")
    }

    pub fn frames(&self) -> &[HumanPoseFrame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames[self.frames.len() - 1].timestamp - self.frames[0].timestamp
    }

    /// Whether timestamps sit on the `1/fps` grid.
    pub fn is_uniform(&self, fps: f64) -> bool {
        let t0 = self.frames[0].timestamp;
        self.frames
            .iter()
            .enumerate()
            .all(|(i, f)| (f.timestamp - (t0 + i as f64 / fps)).abs() < 1e-9)
    }

    /// The sequence as it will read back from a motion file (f32 storage).
    pub fn quantized(&self) -> MotionSequence {
        MotionSequence {
            frames: self.frames.iter().map(HumanPoseFrame::quantized).collect(),
            fps: self.fps as f32 as f64,
            name: self.name.clone(),
            source: self.source.clone(),
        }
    }

    /// Resamples to `target_fps`: slerp for rotations, linear for translation.
    pub fn resample(&self, target_fps: f64) -> Result<MotionSequence> {
        if !(target_fps.is_finite() && target_fps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target fps must be positive, got {target_fps}"
            )));
        }
        if self.frames.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                actual: self.frames.len(),
            });
        }
        if (target_fps - self.fps).abs() < 1e-12 && self.is_uniform(target_fps) {
            return Ok(self.clone());
        }
        let t0 = self.frames[0].timestamp;
        let n_out = (self.duration() * target_fps + 1e-9).floor() as usize + 1;
        let mut out = Vec::with_capacity(n_out);
        let mut seg = 0;
        for k in 0..n_out {
            let t = t0 + k as f64 / target_fps;
            while seg + 2 < self.frames.len() && self.frames[seg + 1].timestamp <= t {
                seg += 1;
            }
            let (a, b) = (&self.frames[seg], &self.frames[seg + 1]);
            let w = ((t - a.timestamp) / (b.timestamp - a.timestamp)).clamp(0.0, 1.0);
            let frame = if w < 1e-12 {
                HumanPoseFrame {
                    timestamp: t,
                    ..a.clone()
                }
            } else if w > 1.0 - 1e-12 {
                HumanPoseFrame {
                    timestamp: t,
                    ..b.clone()
                }
            } else {
                a.interpolate(b, w, t)
            };
            out.push(frame);
        }
        if out.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                actual: out.len(),
            });
        }
        MotionSequence::new(out, target_fps, self.name.clone(), self.source.clone())
    }
}

impl PartialEq for MotionSequence {
    /// Compares persisted content: frames, frame rate and name.
    fn eq(&self, other: &Self) -> bool {
        self.fps == other.fps && self.name == other.name && self.frames == other.frames
    }
}
