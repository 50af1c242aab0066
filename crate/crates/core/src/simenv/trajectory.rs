//! Per-step trajectory dump as line-delimited JSON.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::reward::RewardBreakdown;
use super::state::{FootContact, SimState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub time: f64,
    pub base_position: [f64; 3],
    pub roll_pitch_yaw: [f64; 3],
    pub base_linear_velocity: [f64; 3],
    pub base_angular_velocity: [f64; 3],
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub tau: Vec<f64>,
    pub last_action: Vec<f64>,
    pub contacts: [FootContact; 2],
    pub reward: RewardBreakdown,
    pub done: bool,
    pub fault: bool,
}

impl TrajectoryRecord {
    pub fn new(step: u64, s: &SimState, reward: &RewardBreakdown, done: bool, fault: bool) -> Self {
        let (r, p, y) = s.roll_pitch_yaw();
        TrajectoryRecord {
            step,
            time: s.time,
            base_position: s.base_position.into(),
            roll_pitch_yaw: [r, p, y],
            base_linear_velocity: s.base_linear_velocity.into(),
            base_angular_velocity: s.base_angular_velocity.into(),
            q: s.q.clone(),
            qd: s.qd.clone(),
            tau: s.tau.clone(),
            last_action: s.last_action.clone(),
            contacts: s.contacts,
            reward: reward.clone(),
            done,
            fault,
        }
    }
}

pub fn write_trajectory(records: &[TrajectoryRecord], out: &mut impl Write) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("trajectory log", e))?;
    }
    Ok(())
}

pub fn read_trajectory(input: impl BufRead) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("trajectory log", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                offset: offset + e.column().saturating_sub(1) as u64,
                message: e.to_string(),
            })?);
        }
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}
