//! The 33-DoF humanoid: kinematic tree, limits, inertials and actuators.

mod kinematics;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::Rotation;

pub use kinematics::{forward_kinematics, HumanoidPose, LinkTransforms};

pub const NUM_JOINTS: usize = 33;
pub const NUM_BODY_JOINTS: usize = 19;
pub const NUM_WRIST_JOINTS: usize = 2;
pub const NUM_HAND_JOINTS: usize = 12;
pub const BODY: std::ops::Range<usize> = 0..19;
pub const WRISTS: std::ops::Range<usize> = 19..21;
pub const HANDS: std::ops::Range<usize> = 21..33;

const DEFAULT_MODEL: &str = include_str!("../../assets/humanoid_33dof.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointGroup {
    Body,
    Wrist,
    Hand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limb {
    LeftLeg,
    RightLeg,
    Waist,
    LeftArm,
    RightArm,
    LeftHand,
    RightHand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Index,
    Middle,
    Ring,
    Little,
    Thumb,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSpec {
    name: String,
    mass: f64,
    com: [f64; 3],
    inertia: [[f64; 3]; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointSpec {
    name: String,
    parent: String,
    child: String,
    group: JointGroup,
    limb: Limb,
    #[serde(default)]
    finger: Option<Finger>,
    origin: [f64; 3],
    axis: [f64; 3],
    limits: [f64; 2],
    velocity_limit: f64,
    torque_limit: f64,
    effective_inertia: f64,
    damping: f64,
    kp: f64,
    kd: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    name: String,
    feet: [String; 2],
    end_effectors: [String; 2],
    foot_contact_points: Vec<[f64; 3]>,
    links: Vec<LinkSpec>,
    joints: Vec<JointSpec>,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia: Matrix3<f64>,
}

#[derive(Clone, Debug)]
pub struct Joint {
    pub name: String,
    pub parent_link: usize,
    pub child_link: usize,
    pub group: JointGroup,
    pub limb: Limb,
    pub finger: Option<Finger>,
    pub origin: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
    pub torque_limit: f64,
    pub effective_inertia: f64,
    pub damping: f64,
    pub kp: f64,
    pub kd: f64,
}

#[derive(Clone, Debug)]
pub struct HumanoidModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub root_link: usize,
    /// Left, right.
    pub feet: [usize; 2],
    /// Left, right.
    pub end_effectors: [usize; 2],
    pub foot_contact_points: Vec<Vector3<f64>>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl HumanoidModel {
    /// The shipped 33-DoF model.
    pub fn default_model() -> Self {
        Self::from_toml_str(DEFAULT_MODEL).expect("shipped model is valid")
    }

    pub fn default_model_text() -> &'static str {
        DEFAULT_MODEL
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ModelSpec = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "model".to_string());
            schema(path, e.message().to_string())
        })?;
        Self::from_spec(spec)
    }

    fn from_spec(spec: ModelSpec) -> Result<Self> {
        let mut link_index = HashMap::new();
        let mut links = Vec::with_capacity(spec.links.len());
        for (i, l) in spec.links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(schema(format!("links[{i}].name"), format!("duplicate link `{}`", l.name)));
            }
            if !(l.mass.is_finite() && l.mass > 0.0) {
                return Err(schema(format!("links[{i}].mass"), "mass must be positive"));
            }
            let inertia = Matrix3::from_row_slice(&l.inertia.concat());
            if inertia.iter().any(|v| !v.is_finite()) || (inertia - inertia.transpose()).amax() > 1e-12 {
                return Err(schema(format!("links[{i}].inertia"), "inertia must be finite and symmetric"));
            }
            links.push(Link {
                name: l.name.clone(),
                mass: l.mass,
                com: Vector3::from(l.com),
                inertia,
            });
        }
        let find = |name: &str, path: String| {
            link_index
                .get(name)
                .copied()
                .ok_or_else(|| schema(path, format!("unknown link `{name}`")))
        };

        let mut joints = Vec::with_capacity(spec.joints.len());
        let mut child_of = vec![None; links.len()];
        let mut names = HashMap::new();
        for (i, j) in spec.joints.iter().enumerate() {
            if names.insert(j.name.clone(), i).is_some() {
                return Err(schema(format!("joints[{i}].name"), format!("duplicate joint `{}`", j.name)));
            }
            let parent_link = find(&j.parent, format!("joints[{i}].parent"))?;
            let child_link = find(&j.child, format!("joints[{i}].child"))?;
            if let Some(prev) = child_of[child_link] {
                return Err(Error::Tree(format!(
                    "link `{}` is the child of both joint {prev} and joint {i}",
                    j.child
                )));
            }
            child_of[child_link] = Some(i);
            let axis = Vector3::from(j.axis);
            let n = axis.norm();
            if !(n.is_finite() && n > 1e-9) {
                return Err(schema(format!("joints[{i}].axis"), "axis must be a non-zero vector"));
            }
            let [lo, hi] = j.limits;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Limits {
                    joint: j.name.clone(),
                    lo,
                    hi,
                });
            }
            let positive = [
                ("velocity_limit", j.velocity_limit),
                ("torque_limit", j.torque_limit),
                ("effective_inertia", j.effective_inertia),
            ];
            for (field, v) in positive {
                if !(v.is_finite() && v > 0.0) {
                    return Err(schema(format!("joints[{i}].{field}"), "must be positive"));
                }
            }
            for (field, v) in [("damping", j.damping), ("kp", j.kp), ("kd", j.kd)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(schema(format!("joints[{i}].{field}"), "must be non-negative"));
                }
            }
            joints.push(Joint {
                name: j.name.clone(),
                parent_link,
                child_link,
                group: j.group,
                limb: j.limb,
                finger: j.finger,
                origin: Vector3::from(j.origin),
                axis: axis / n,
                lower: lo,
                upper: hi,
                velocity_limit: j.velocity_limit,
                torque_limit: j.torque_limit,
                effective_inertia: j.effective_inertia,
                damping: j.damping,
                kp: j.kp,
                kd: j.kd,
            });
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&l| child_of[l].is_none()).collect();
        if roots.len() != 1 {
            let names: Vec<&str> = roots.iter().map(|&r| links[r].name.as_str()).collect();
            return Err(Error::Tree(format!(
                "expected exactly one floating root link, found {}: [{}]",
                roots.len(),
                names.join(", ")
            )));
        }
        let root_link = roots[0];
        // tree order: each joint's parent link must already be placed
        let mut placed = vec![false; links.len()];
        placed[root_link] = true;
        for (i, j) in joints.iter().enumerate() {
            if !placed[j.parent_link] {
                return Err(Error::Tree(format!(
                    "joint `{}` (index {i}) precedes its parent link `{}` or closes a cycle",
                    j.name, links[j.parent_link].name
                )));
            }
            placed[j.child_link] = true;
        }

        let feet = [
            find(&spec.feet[0], "feet[0]".into())?,
            find(&spec.feet[1], "feet[1]".into())?,
        ];
        let end_effectors = [
            find(&spec.end_effectors[0], "end_effectors[0]".into())?,
            find(&spec.end_effectors[1], "end_effectors[1]".into())?,
        ];
        if spec.foot_contact_points.is_empty() {
            return Err(schema("foot_contact_points", "at least one contact point required"));
        }
        let model = HumanoidModel {
            name: spec.name,
            links,
            joints,
            root_link,
            feet,
            end_effectors,
            foot_contact_points: spec.foot_contact_points.iter().map(|p| Vector3::from(*p)).collect(),
        };
        model.check_layout()?;
        Ok(model)
    }

    /// Group sizes and ordering of the 33-DoF layout.
    fn check_layout(&self) -> Result<()> {
        if self.joints.len() != NUM_JOINTS {
            return Err(schema("joints", format!("expected {NUM_JOINTS} joints, found {}", self.joints.len())));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let expected = if BODY.contains(&i) {
                JointGroup::Body
            } else if WRISTS.contains(&i) {
                JointGroup::Wrist
            } else {
                JointGroup::Hand
            };
            if j.group != expected {
                return Err(schema(
                    format!("joints[{i}].group"),
                    format!("joint `{}` must be in group {expected:?} (19 body, 2 wrist, 12 hand in order)", j.name),
                ));
            }
        }
        let count = |limb: Limb, range: std::ops::Range<usize>| {
            self.joints[range].iter().filter(|j| j.limb == limb).count()
        };
        let expected = [
            (Limb::LeftLeg, 5),
            (Limb::RightLeg, 5),
            (Limb::Waist, 1),
            (Limb::LeftArm, 4),
            (Limb::RightArm, 4),
        ];
        for (limb, n) in expected {
            let got = count(limb, BODY);
            if got != n {
                return Err(schema("joints", format!("body group needs {n} {limb:?} joints, found {got}")));
            }
        }
        for limb in [Limb::LeftHand, Limb::RightHand] {
            let hand: Vec<&Joint> = self.joints[HANDS].iter().filter(|j| j.limb == limb).collect();
            let per = |f: Finger| hand.iter().filter(|j| j.finger == Some(f)).count();
            let ok = hand.len() == 6
                && [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little]
                    .iter()
                    .all(|&f| per(f) == 1)
                && per(Finger::Thumb) == 2;
            if !ok {
                return Err(schema(
                    "joints",
                    format!("{limb:?} must have one joint per index/middle/ring/little finger and two thumb joints"),
                ));
            }
        }
        Ok(())
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    /// Clips each component to its joint limits. `q` may cover the first
    /// `q.len()` joints (e.g. only the 19 body joints).
    pub fn clamp_to_limits(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.joints)
            .map(|(v, j)| v.clamp(j.lower, j.upper))
            .collect()
    }

    /// Clips `q` entries that map to `joint_indices`.
    pub fn clamp_indexed(&self, q: &mut [f64], joint_indices: &[usize]) {
        for (v, &j) in q.iter_mut().zip(joint_indices) {
            *v = v.clamp(self.joints[j].lower, self.joints[j].upper);
        }
    }

    /// Zero configuration with the lowest foot contact point on the ground.
    pub fn standing_pose(&self) -> HumanoidPose {
        let mut pose = HumanoidPose::zero(self);
        let fk = forward_kinematics(self, &pose).expect("zero pose matches model");
        pose.base_position.z = -self.min_contact_height(&fk);
        pose
    }

    /// World positions of every foot contact point, left foot first.
    pub fn contact_points(&self, fk: &LinkTransforms) -> [Vec<Vector3<f64>>; 2] {
        self.feet.map(|f| {
            self.foot_contact_points
                .iter()
                .map(|p| fk.positions[f] + fk.rotations[f].rotate(p))
                .collect()
        })
    }

    pub fn min_contact_height(&self, fk: &LinkTransforms) -> f64 {
        self.contact_points(fk)
            .iter()
            .flatten()
            .map(|p| p.z)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mass-weighted center of mass of all links, world frame.
    pub fn center_of_mass(&self, fk: &LinkTransforms) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            acc += l.mass * (fk.positions[i] + fk.rotations[i].rotate(&l.com));
        }
        acc / self.total_mass()
    }

    /// Composite rotational inertia about `point`, world frame.
    pub fn composite_inertia(&self, fk: &LinkTransforms, point: &Vector3<f64>) -> Matrix3<f64> {
        let mut acc = Matrix3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            let r = fk.rotations[i].matrix();
            let c = fk.positions[i] + r * l.com - point;
            acc += r * l.inertia * r.transpose()
                + l.mass * (Matrix3::identity() * c.dot(&c) - c * c.transpose());
        }
        acc
    }

    /// Rotation of the base frame plus `q` for convenience in tests.
    pub fn pose(&self, base_position: Vector3<f64>, base_rotation: Rotation, q: Vec<f64>) -> HumanoidPose {
        HumanoidPose {
            base_position,
            base_rotation,
            q,
        }
    }
}
