//! Physical randomization ranges and per-episode draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
pub type Range = (f64, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamRanges {
    /// kg added to the pelvis.
    pub base_payload: Range,
    /// kg added to each hand.
    pub ee_payload: Range,
    /// m, per axis, shift of the pelvis center of mass.
    pub com_offset: Range,
    /// Multiplier on every actuator torque.
    pub motor_strength: Range,
    /// Coulomb coefficient between feet and ground.
    pub friction: Range,
    /// s, from policy output to actuator.
    pub control_delay: Range,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            base_payload: (-3.0, 3.0),
            ee_payload: (0.0, 0.5),
            com_offset: (-0.1, 0.1),
            motor_strength: (0.8, 1.1),
            friction: (0.3, 0.9),
            control_delay: (0.02, 0.04),
        }
    }
}

impl ParamRanges {
    /// Every range collapsed onto `params`.
    pub fn fixed(params: &EnvParams) -> Self {
        ParamRanges {
            base_payload: (params.base_payload, params.base_payload),
            ee_payload: (params.ee_payload, params.ee_payload),
            com_offset: (params.com_offset[0], params.com_offset[0]),
            motor_strength: (params.motor_strength, params.motor_strength),
            friction: (params.friction, params.friction),
            control_delay: (params.control_delay, params.control_delay),
        }
    }

    fn fields(&self) -> [(&'static str, Range); 6] {
        [
            ("base_payload", self.base_payload),
            ("ee_payload", self.ee_payload),
            ("com_offset", self.com_offset),
            ("motor_strength", self.motor_strength),
            ("friction", self.friction),
            ("control_delay", self.control_delay),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in self.fields() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("range {name} = [{lo}, {hi}] is not a valid interval")));
            }
        }
        if self.motor_strength.0 < 0.0 || self.friction.0 < 0.0 || self.control_delay.0 < 0.0 || self.ee_payload.0 < 0.0 {
            return Err(Error::Config("strength, friction, delay and hand payload must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &EnvParams) -> bool {
        let inside = |v: f64, (lo, hi): Range| v >= lo && v <= hi;
        inside(p.base_payload, self.base_payload)
            && inside(p.ee_payload, self.ee_payload)
            && p.com_offset.iter().all(|c| inside(*c, self.com_offset))
            && inside(p.motor_strength, self.motor_strength)
            && inside(p.friction, self.friction)
            && inside(p.control_delay, self.control_delay)
    }
}

/// One draw of the physical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub base_payload: f64,
    pub ee_payload: f64,
    pub com_offset: [f64; 3],
    pub motor_strength: f64,
    pub friction: f64,
    pub control_delay: f64,
}

impl Default for EnvParams {
    /// Nominal robot: no payload, full strength, mid-range friction, 20 ms delay.
    fn default() -> Self {
        EnvParams {
            base_payload: 0.0,
            ee_payload: 0.0,
            com_offset: [0.0; 3],
            motor_strength: 1.0,
            friction: 0.6,
            control_delay: 0.02,
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): Range) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Independent uniform draws per field, in declaration order.
pub fn sample_env_params(rng: &mut impl Rng, ranges: &ParamRanges) -> Result<EnvParams> {
    ranges.validate()?;
    Ok(EnvParams {
        base_payload: uniform(rng, ranges.base_payload),
        ee_payload: uniform(rng, ranges.ee_payload),
        com_offset: [
            uniform(rng, ranges.com_offset),
            uniform(rng, ranges.com_offset),
            uniform(rng, ranges.com_offset),
        ],
        motor_strength: uniform(rng, ranges.motor_strength),
        friction: uniform(rng, ranges.friction),
        control_delay: uniform(rng, ranges.control_delay),
    })
}
