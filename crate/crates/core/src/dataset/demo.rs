//! Recorded imitation episodes and their binary container.
//!
//! Layout (little-endian): magic `HPDEM1`, rate f32, n_steps u32,
//! proprio_dim u16, feat_dim u16, action_dim u16, metadata length u32 and a
//! UTF-8 JSON metadata block, then one packed f32 record per step:
//! proprioception, camera 0 features, camera 1 features, action.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};

pub const DEMO_MAGIC: &[u8; 6] = b"HPDEM1";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoMetadata {
    pub name: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    /// Task-specific latent that generated the episode, when known.
    pub latent: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoStep {
    pub proprio: Vec<f32>,
    /// One feature vector per camera.
    pub features: [Vec<f32>; 2],
    /// Whole-body target pose (33 joint angles in the shipped layout).
    pub action: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub rate: f64,
    pub proprio_dim: usize,
    pub feat_dim: usize,
    pub action_dim: usize,
    pub steps: Vec<DemoStep>,
    pub metadata: DemoMetadata,
}

impl Demonstration {
    /// Checks dimensions, rate and step count.
    pub fn new(rate: f64, steps: Vec<DemoStep>, metadata: DemoMetadata) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::Empty("demonstration needs at least one step".into()))?;
        let demo = Demonstration {
            rate,
            proprio_dim: first.proprio.len(),
            feat_dim: first.features[0].len(),
            action_dim: first.action.len(),
            steps,
            metadata,
        };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidArgument(format!("demonstration rate must be positive, got {}", self.rate)));
        }
        if self.steps.is_empty() {
            return Err(Error::Empty("demonstration needs at least one step".into()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            let dims = [
                (self.proprio_dim, s.proprio.len(), "proprioception"),
                (self.feat_dim, s.features[0].len(), "camera 0 features"),
                (self.feat_dim, s.features[1].len(), "camera 1 features"),
                (self.action_dim, s.action.len(), "action"),
            ];
            for (expected, actual, what) in dims {
                if expected != actual {
                    return Err(Error::dim(expected, actual, format!("step {i} {what}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Seconds covered by the recorded steps.
    pub fn duration(&self) -> f64 {
        self.steps.len() as f64 / self.rate
    }
}

fn dim16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit the demonstration header")))
}

pub fn write_demonstration(demo: &Demonstration) -> Result<Vec<u8>> {
    demo.validate()?;
    let meta = serde_json::to_vec(&demo.metadata).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut w = Writer::default();
    w.bytes(DEMO_MAGIC);
    w.f32(demo.rate as f32);
    w.u32(u32::try_from(demo.steps.len()).map_err(|_| Error::InvalidArgument("too many steps".into()))?);
    w.u16(dim16(demo.proprio_dim, "proprio_dim")?);
    w.u16(dim16(demo.feat_dim, "feat_dim")?);
    w.u16(dim16(demo.action_dim, "action_dim")?);
    w.u32(meta.len() as u32);
    w.bytes(&meta);
    for s in &demo.steps {
        for v in s.proprio.iter().chain(&s.features[0]).chain(&s.features[1]).chain(&s.action) {
            w.f32(*v);
        }
    }
    Ok(w.buf)
}

pub fn read_demonstration(bytes: &[u8]) -> Result<Demonstration> {
    let mut r = Reader::new(bytes);
    r.magic(DEMO_MAGIC)?;
    let rate_at = r.offset();
    let rate = r.f32("rate")? as f64;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Parse {
            offset: rate_at,
            message: format!("rate must be positive, got {rate}"),
        });
    }
    let n_at = r.offset();
    let n = r.u32("n_steps")? as usize;
    if n == 0 {
        return Err(Error::Parse {
            offset: n_at,
            message: "demonstration has no steps".into(),
        });
    }
    let proprio_dim = r.u16("proprio_dim")? as usize;
    let feat_dim = r.u16("feat_dim")? as usize;
    let action_dim = r.u16("action_dim")? as usize;
    let meta_len = r.u32("metadata length")? as usize;
    let meta_at = r.offset();
    let meta_bytes = r.take(meta_len, "metadata")?;
    let metadata: DemoMetadata = serde_json::from_slice(meta_bytes).map_err(|e| Error::Parse {
        offset: meta_at + e.column().saturating_sub(1) as u64,
        message: format!("metadata: {e}"),
    })?;
    let record = proprio_dim + 2 * feat_dim + action_dim;
    let needed = n.checked_mul(record * 4).ok_or_else(|| r.err("step count overflows"))?;
    if r.remaining() != needed {
        return Err(r.err(format!(
            "expected {needed} bytes of step records, found {}",
            r.remaining()
        )));
    }
    let read = |len: usize, r: &mut Reader| -> Result<Vec<f32>> { (0..len).map(|_| r.f32("step record")).collect() };
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let proprio = read(proprio_dim, &mut r)?;
        let f0 = read(feat_dim, &mut r)?;
        let f1 = read(feat_dim, &mut r)?;
        let action = read(action_dim, &mut r)?;
        steps.push(DemoStep {
            proprio,
            features: [f0, f1],
            action,
        });
    }
    Ok(Demonstration {
        rate,
        proprio_dim,
        feat_dim,
        action_dim,
        steps,
        metadata,
    })
}

pub fn save_demonstration(demo: &Demonstration, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_demonstration(demo)?)
}

pub fn load_demonstration(path: impl AsRef<Path>) -> Result<Demonstration> {
    read_demonstration(&read_file(path.as_ref())?)
}
