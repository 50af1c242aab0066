//! Retarget map: which human Euler component feeds which humanoid joint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HumanoidModel, JointGroup};
use crate::motion::skeleton::{self, Side};

const DEFAULT_MAP: &str = include_str!("../../assets/retarget_map.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EulerComponent {
    Roll,
    Pitch,
    Yaw,
}

impl EulerComponent {
    pub fn pick(self, (roll, pitch, yaw): (f64, f64, f64)) -> f64 {
        match self {
            EulerComponent::Roll => roll,
            EulerComponent::Pitch => pitch,
            EulerComponent::Yaw => yaw,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyEntrySpec {
    source: String,
    component: EulerComponent,
    target: String,
    #[serde(default = "one")]
    sign: f64,
    #[serde(default)]
    offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandEntrySpec {
    side: Side,
    source: String,
    component: EulerComponent,
    target: String,
    #[serde(default = "one")]
    sign: f64,
    #[serde(default)]
    offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapSpec {
    #[serde(default)]
    body: Vec<BodyEntrySpec>,
    #[serde(default)]
    hand: Vec<HandEntrySpec>,
}

/// One copy rule, resolved to indices.
#[derive(Clone, Debug, PartialEq)]
pub struct MapEntry {
    /// Body joint index, or hand slot (0..30) for hand entries.
    pub source: usize,
    pub component: EulerComponent,
    /// Humanoid joint index.
    pub target: usize,
    pub sign: f64,
    pub offset: f64,
}

impl MapEntry {
    pub fn apply(&self, euler: (f64, f64, f64)) -> f64 {
        self.sign * self.component.pick(euler) + self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetargetMap {
    pub body: Vec<MapEntry>,
    /// Per side, in model hand-joint order.
    pub hands: [Vec<MapEntry>; 2],
}

impl RetargetMap {
    pub fn default_map(model: &HumanoidModel) -> Result<Self> {
        Self::from_toml_str(DEFAULT_MAP, model)
    }

    pub fn default_map_text() -> &'static str {
        DEFAULT_MAP
    }

    pub fn load(path: impl AsRef<Path>, model: &HumanoidModel) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, model)
    }

    pub fn from_toml_str(text: &str, model: &HumanoidModel) -> Result<Self> {
        let spec: MapSpec = toml::from_str(text).map_err(|e| Error::Schema {
            path: "retarget map".into(),
            message: e.message().to_string(),
        })?;
        Self::resolve(spec, model)
    }

    fn resolve(spec: MapSpec, model: &HumanoidModel) -> Result<Self> {
        let mut seen = vec![false; model.num_joints()];
        let mut mark = |name: &str, path: String, group: JointGroup| -> Result<usize> {
            let j = model.joint_index(name).ok_or_else(|| Error::Config(format!("{path}: unknown humanoid joint `{name}`")))?;
            if model.joints[j].group != group {
                return Err(Error::Config(format!("{path}: joint `{name}` is not a {group:?} joint")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Config(format!("{path}: joint `{name}` is mapped more than once")));
            }
            Ok(j)
        };

        let mut body = Vec::with_capacity(spec.body.len());
        for (i, e) in spec.body.iter().enumerate() {
            let source = skeleton::body_index(&e.source)
                .filter(|&s| s != 0)
                .ok_or_else(|| Error::Config(format!("body[{i}]: unknown or unmappable human joint `{}`", e.source)))?;
            let target = mark(&e.target, format!("body[{i}]"), JointGroup::Body)?;
            body.push(MapEntry {
                source,
                component: e.component,
                target,
                sign: e.sign,
                offset: e.offset,
            });
        }
        let mut hands: [Vec<MapEntry>; 2] = [Vec::new(), Vec::new()];
        for (i, e) in spec.hand.iter().enumerate() {
            let source = skeleton::hand_slot(e.side, &e.source)
                .ok_or_else(|| Error::Config(format!("hand[{i}]: unknown hand joint `{}`", e.source)))?;
            let target = mark(&e.target, format!("hand[{i}]"), JointGroup::Hand)?;
            hands[e.side.index()].push(MapEntry {
                source,
                component: e.component,
                target,
                sign: e.sign,
                offset: e.offset,
            });
        }
        let missing: Vec<String> = model
            .joints
            .iter()
            .enumerate()
            .filter(|(j, joint)| joint.group != JointGroup::Wrist && !seen[*j])
            .map(|(_, joint)| joint.name.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteMap { missing });
        }
        body.sort_by_key(|e| e.target);
        for h in &mut hands {
            h.sort_by_key(|e| e.target);
        }
        Ok(RetargetMap { body, hands })
    }
}
