//! Procedural human motions for tests, demos and smoke runs.
//!
//! Every generator keeps the lowest ankle at its rest height, so the
//! retargeted humanoid stays on the ground without a separate contact pass.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::motion::skeleton::{self, Side};
use crate::motion::{HumanPoseFrame, MotionSequence};
use crate::rotation::Rotation;

fn index(name: &str) -> usize {
    skeleton::body_index(name).expect("known joint")
}

/// Shifts the root vertically so the lowest ankle sits at rest height.
fn ground(frame: &mut HumanPoseFrame) {
    let pose = frame.skeleton_pose();
    let low = pose.body_positions[skeleton::LEFT_ANKLE]
        .z
        .min(pose.body_positions[skeleton::RIGHT_ANKLE].z);
    frame.root_translation.z += skeleton::ANKLE_HEIGHT - low;
}

/// Rest pose held still for `duration` seconds.
pub fn standing(duration: f64, fps: f64) -> Result<MotionSequence> {
    let n = (duration * fps).round() as usize + 1;
    let frames = (0..n).map(|i| HumanPoseFrame::rest(i as f64 / fps)).collect();
    MotionSequence::new(frames, fps, "standing", "synthetic")
}

/// Forward walking gait parameters.
#[derive(Clone, Copy, Debug)]
pub struct GaitParams {
    /// Stride frequency, Hz (one full left-right cycle).
    pub frequency: f64,
    /// Hip pitch amplitude, rad.
    pub hip_amplitude: f64,
    /// Peak swing knee flexion, rad.
    pub knee_peak: f64,
    /// Fraction of the cycle spent in swing, per leg (< 0.5 gives double support).
    pub swing_fraction: f64,
    /// Constant heading, rad.
    pub heading: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            frequency: 0.9,
            hip_amplitude: 0.35,
            knee_peak: 0.9,
            swing_fraction: 0.38,
            heading: 0.0,
        }
    }
}

/// Walking in place on a moving root: the stance ankle stays fixed in the
/// world, which sets the root's horizontal motion.
pub fn walking(duration: f64, fps: f64, gait: &GaitParams) -> Result<MotionSequence> {
    let n = (duration * fps).round() as usize + 1;
    let (hip, knee) = ([index("left_hip"), index("right_hip")], [index("left_knee"), index("right_knee")]);
    let (shoulder, elbow) = (
        [index("left_shoulder"), index("right_shoulder")],
        [skeleton::LEFT_ELBOW, skeleton::RIGHT_ELBOW],
    );
    let heading = Rotation::rz(gait.heading);
    // swing occupies the part of the cycle where the leg moves forward, centered on it
    let threshold = (std::f64::consts::PI * gait.swing_fraction).cos();
    let mut frames: Vec<HumanPoseFrame> = Vec::with_capacity(n);
    let mut prev_rel: Option<[Vector3<f64>; 2]> = None;
    let mut root_xy = Vector3::zeros();
    for i in 0..n {
        let t = i as f64 / fps;
        let mut f = HumanPoseFrame::rest(t);
        f.set_root_rotation(heading);
        for s in 0..2 {
            let phase = 2.0 * std::f64::consts::PI * gait.frequency * t + s as f64 * std::f64::consts::PI;
            let swing = ((phase.cos() - threshold) / (1.0 - threshold)).max(0.0);
            f.body[hip[s]] = Rotation::ry(-gait.hip_amplitude * phase.sin());
            f.body[knee[s]] = Rotation::ry(gait.knee_peak * swing);
            f.body[shoulder[s]] = Rotation::ry(0.3 * phase.sin());
            f.body[elbow[s]] = Rotation::ry(-0.3);
        }
        f.root_translation = Vector3::new(0.0, 0.0, f.root_translation.z);
        ground(&mut f);
        let pose = f.skeleton_pose();
        let rel = [skeleton::LEFT_ANKLE, skeleton::RIGHT_ANKLE].map(|a| pose.body_positions[a] - f.root_translation);
        if let Some(prev) = prev_rel {
            // stance foot is the lower one
            let s = if rel[0].z <= rel[1].z { 0 } else { 1 };
            let d = rel[s] - prev[s];
            root_xy -= Vector3::new(d.x, d.y, 0.0);
        }
        prev_rel = Some(rel);
        f.root_translation.x = root_xy.x;
        f.root_translation.y = root_xy.y;
        frames.push(f);
    }
    MotionSequence::new(frames, fps, "walking", "synthetic")
}

/// Vertical hop: crouch, flight of the given apex height, landing.
pub fn jump(apex: f64, fps: f64) -> Result<MotionSequence> {
    let g = 9.81;
    let flight = 2.0 * (2.0 * apex / g).sqrt();
    let (crouch, total) = (0.4, 0.4 + flight + 0.4);
    let n = (total * fps).round() as usize + 1;
    let legs = [
        (index("left_hip"), -0.5),
        (index("right_hip"), -0.5),
        (index("left_knee"), 1.0),
        (index("right_knee"), 1.0),
        (skeleton::LEFT_ANKLE, -0.5),
        (skeleton::RIGHT_ANKLE, -0.5),
    ];
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / fps;
            let mut f = HumanPoseFrame::rest(t);
            let bend = if t < crouch {
                (std::f64::consts::PI * t / crouch).sin()
            } else if t > crouch + flight {
                (std::f64::consts::PI * (t - crouch - flight) / 0.4).sin()
            } else {
                0.0
            };
            for (j, a) in legs {
                f.body[j] = Rotation::ry(a * 0.6 * bend);
            }
            ground(&mut f);
            if t >= crouch && t <= crouch + flight {
                let tf = t - crouch;
                f.root_translation.z += (g * flight / 2.0) * tf - 0.5 * g * tf * tf;
            }
            f
        })
        .collect();
    MotionSequence::new(frames, fps, "jump", "synthetic")
}

/// Smooth random whole-body motion: each joint follows a sum of two
/// sinusoids with random amplitude, frequency and phase.
pub fn random_motion(duration: f64, fps: f64, amplitude: f64, rng: &mut impl Rng) -> Result<MotionSequence> {
    let n = (duration * fps).round() as usize + 1;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut wave = || -> [(f64, f64, f64); 2] {
        [0, 1].map(|_| {
            (
                amplitude * normal.sample(rng) * 0.5,
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
    };
    let body_waves: Vec<[[(f64, f64, f64); 2]; 3]> =
        (0..skeleton::NUM_BODY_JOINTS).map(|_| [wave(), wave(), wave()]).collect();
    let hand_waves: Vec<[[(f64, f64, f64); 2]; 3]> =
        (0..skeleton::NUM_HAND_JOINTS).map(|_| [wave(), wave(), wave()]).collect();
    let eval = |w: &[[(f64, f64, f64); 2]; 3], t: f64| -> [f64; 3] {
        w.map(|c| c.iter().map(|(a, fr, ph)| a * (std::f64::consts::TAU * fr * t + ph).sin()).sum())
    };
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / fps;
            let mut f = HumanPoseFrame::rest(t);
            for (j, w) in body_waves.iter().enumerate().skip(1) {
                let [r, p, y] = eval(w, t);
                f.body[j] = Rotation::from_euler(r, p, y).expect("finite");
            }
            let [r, p, y] = eval(&body_waves[0], t);
            f.set_root_rotation(Rotation::from_euler(0.2 * r, 0.2 * p, y).expect("finite"));
            for (j, w) in hand_waves.iter().enumerate() {
                let [r, p, y] = eval(w, t);
                f.hands[j] = Rotation::from_euler(r, p.abs(), y).expect("finite");
            }
            ground(&mut f);
            f
        })
        .collect();
    MotionSequence::new(frames, fps, "random", "synthetic")
}

/// A rest frame with random per-joint rotations, for fuzzing.
pub fn random_frame(rng: &mut impl Rng, max_angle: f64) -> HumanPoseFrame {
    let mut rot = || {
        Rotation::from_euler(
            rng.gen_range(-max_angle..max_angle),
            rng.gen_range(-max_angle..max_angle),
            rng.gen_range(-max_angle..max_angle),
        )
        .expect("finite")
    };
    let mut f = HumanPoseFrame::rest(0.0);
    for r in f.body.iter_mut().chain(f.hands.iter_mut()) {
        *r = rot();
    }
    f
}

/// Fraction of frames in which the given side's ankle is the lower one.
pub fn stance_fraction(seq: &MotionSequence, side: Side) -> f64 {
    let a = [skeleton::LEFT_ANKLE, skeleton::RIGHT_ANKLE];
    let lower = seq
        .frames()
        .iter()
        .filter(|f| {
            let p = f.skeleton_pose();
            let (me, other) = (p.body_positions[a[side.index()]].z, p.body_positions[a[1 - side.index()]].z);
            me <= other + 1e-9
        })
        .count();
    lower as f64 / seq.len() as f64
}
