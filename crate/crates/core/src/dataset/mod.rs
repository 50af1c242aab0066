//! Motion filtering, corpus statistics, target sampling and demonstrations.

mod demo;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HumanoidModel;
use crate::motion::{skeleton, MotionSequence};
use crate::retarget::{build_target_stream, retarget_frame, RetargetMap, TargetStream, WholeBodyTarget};

pub use demo::{
    load_demonstration, read_demonstration, save_demonstration, write_demonstration, DemoMetadata, DemoStep,
    Demonstration, DEMO_MAGIC,
};

/// Feasibility thresholds applied after retargeting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterCriteria {
    /// rad/s, any humanoid joint.
    pub max_joint_velocity: f64,
    /// m/s, human root translation.
    pub max_root_speed: f64,
    /// m, |root height − rest pelvis height|.
    pub max_root_height_deviation: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    /// m, how far the retargeted sole may sink below the ground.
    pub max_ground_penetration: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            max_joint_velocity: 15.0,
            max_root_speed: 4.0,
            max_root_height_deviation: 0.6,
            min_duration: 1.0,
            max_duration: 120.0,
            max_ground_penetration: 0.03,
        }
    }
}

impl FilterCriteria {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("max_joint_velocity", self.max_joint_velocity),
            ("max_root_speed", self.max_root_speed),
            ("max_root_height_deviation", self.max_root_height_deviation),
            ("min_duration", self.min_duration),
            ("max_duration", self.max_duration),
            ("max_ground_penetration", self.max_ground_penetration),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("filter threshold {name} must be positive, got {v}")));
            }
        }
        if self.min_duration > self.max_duration {
            return Err(Error::Config("min_duration exceeds max_duration".into()));
        }
        Ok(())
    }
}

/// One violated criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReason {
    pub criterion: String,
    /// First offending frame in the 50 Hz retargeted stream, if frame-local.
    pub frame: Option<usize>,
    pub value: f64,
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(k) => write!(f, "{} @ frame {k}", self.criterion),
            None => write!(f, "{} ({:.3})", self.criterion, self.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub accepted: bool,
    pub reasons: Vec<FilterReason>,
}

fn first_exceeding(values: impl Iterator<Item = f64>, limit: f64) -> Option<(usize, f64)> {
    values.enumerate().find(|(_, v)| !(*v <= limit))
}

/// Checks `seq` against every criterion; all violations are reported.
pub fn filter_sequence(
    seq: &MotionSequence,
    criteria: &FilterCriteria,
    map: &RetargetMap,
    model: &HumanoidModel,
) -> Result<FilterReport> {
    criteria.validate()?;
    let mut reasons = Vec::new();
    let duration = seq.duration();
    if duration < criteria.min_duration || duration > criteria.max_duration {
        reasons.push(FilterReason {
            criterion: "duration".into(),
            frame: None,
            value: duration,
        });
    }
    let stream = build_target_stream(seq, map, model)?;
    let rate = stream.rate;
    let resampled = seq.resample(rate)?;

    let joints: Vec<Vec<f64>> = stream.frames.iter().map(WholeBodyTarget::joint_targets).collect();
    let joint_speed = (0..joints.len()).map(|k| {
        if k == 0 {
            0.0
        } else {
            joints[k]
                .iter()
                .zip(&joints[k - 1])
                .map(|(a, b)| ((a - b) * rate).abs())
                .fold(0.0, f64::max)
        }
    });
    if let Some((k, v)) = first_exceeding(joint_speed, criteria.max_joint_velocity) {
        reasons.push(FilterReason {
            criterion: "max_joint_velocity".into(),
            frame: Some(k),
            value: v,
        });
    }
    let root_speed = root_speeds(&resampled);
    if let Some((k, v)) = first_exceeding(root_speed.into_iter(), criteria.max_root_speed) {
        reasons.push(FilterReason {
            criterion: "max_root_speed".into(),
            frame: Some(k),
            value: v,
        });
    }
    let rest = skeleton::rest_pelvis_height();
    let height_dev = resampled.frames().iter().map(|f| (f.root_translation.z - rest).abs());
    if let Some((k, v)) = first_exceeding(height_dev, criteria.max_root_height_deviation) {
        reasons.push(FilterReason {
            criterion: "max_root_height_deviation".into(),
            frame: Some(k),
            value: v,
        });
    }
    let penetration = stream.frames.iter().map(|f| -f.foot_height[0].min(f.foot_height[1]));
    if let Some((k, v)) = first_exceeding(penetration, criteria.max_ground_penetration) {
        reasons.push(FilterReason {
            criterion: "max_ground_penetration".into(),
            frame: Some(k),
            value: v,
        });
    }
    Ok(FilterReport {
        accepted: reasons.is_empty(),
        reasons,
    })
}

/// Root speed per frame: forward difference, first frame uses the next.
pub fn root_speeds(seq: &MotionSequence) -> Vec<f64> {
    let f = seq.frames();
    (0..f.len())
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else { (i - 1, i) };
            (f[b].root_translation - f[a].root_translation).norm() / (f[b].timestamp - f[a].timestamp)
        })
        .collect()
}

/// Nearest-rank percentile of an ascending-sorted slice, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl Percentiles {
    pub fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Percentiles {
            p50: percentile(&values, 50.0),
            p90: percentile(&values, 90.0),
            p99: percentile(&values, 99.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub total_hours: f64,
    /// Per humanoid joint (model order) retargeted angle range.
    pub joint_ranges: Vec<(f64, f64)>,
    pub root_speed: Percentiles,
}

/// Corpus totals; every frame of every sequence is retargeted once.
pub fn dataset_stats(sequences: &[MotionSequence], map: &RetargetMap, model: &HumanoidModel) -> Result<DatasetStats> {
    if sequences.is_empty() {
        return Err(Error::Empty("dataset_stats needs at least one sequence".into()));
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); model.num_joints()];
    let mut speeds = Vec::new();
    let mut seconds = 0.0;
    for seq in sequences {
        seconds += seq.duration();
        speeds.extend(root_speeds(seq));
        for f in seq.frames() {
            for (r, q) in ranges.iter_mut().zip(retarget_frame(f, map, model)?) {
                *r = (r.0.min(q), r.1.max(q));
            }
        }
    }
    Ok(DatasetStats {
        count: sequences.len(),
        total_hours: seconds / 3600.0,
        joint_ranges: ranges,
        root_speed: Percentiles::of(speeds),
    })
}

/// Retargeted target streams ready for RL sampling.
#[derive(Clone, Debug, Default)]
pub struct MotionDataset {
    pub streams: Vec<TargetStream>,
}

impl MotionDataset {
    pub fn new(streams: Vec<TargetStream>) -> Self {
        MotionDataset { streams }
    }

    /// Filters and retargets; returns the dataset plus the per-sequence reports.
    pub fn build(
        sequences: &[MotionSequence],
        criteria: &FilterCriteria,
        map: &RetargetMap,
        model: &HumanoidModel,
    ) -> Result<(Self, Vec<FilterReport>)> {
        let mut streams = Vec::new();
        let mut reports = Vec::with_capacity(sequences.len());
        for seq in sequences {
            let report = filter_sequence(seq, criteria, map, model)?;
            if report.accepted {
                streams.push(build_target_stream(seq, map, model)?);
            }
            reports.push(report);
        }
        Ok((MotionDataset { streams }, reports))
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }
}

/// A uniformly random window of `horizon` targets from a uniformly random
/// sequence long enough to hold it.
pub fn sample_target_segment(
    dataset: &MotionDataset,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<Vec<WholeBodyTarget>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset has no sequences".into()));
    }
    let eligible: Vec<&TargetStream> = dataset.streams.iter().filter(|s| s.len() >= horizon).collect();
    if eligible.is_empty() || horizon == 0 {
        let longest = dataset.streams.iter().map(TargetStream::len).max().unwrap_or(0);
        return Err(Error::TooShort {
            needed: horizon.max(1),
            actual: longest,
        });
    }
    let s = eligible[rng.gen_range(0..eligible.len())];
    let start = rng.gen_range(0..=s.len() - horizon);
    Ok(s.frames[start..start + horizon].to_vec())
}
