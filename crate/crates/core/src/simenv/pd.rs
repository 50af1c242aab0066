//! Joint-space PD control at the 1 kHz tick.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HumanoidModel;

/// PD ticks per policy step; 20 × 50 Hz = 1 kHz.
pub const SUBSTEPS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub torque_limit: Vec<f64>,
    pub substeps: usize,
}

impl PdConfig {
    pub fn from_model(model: &HumanoidModel) -> Self {
        PdConfig {
            kp: model.joints.iter().map(|j| j.kp).collect(),
            kd: model.joints.iter().map(|j| j.kd).collect(),
            torque_limit: model.joints.iter().map(|j| j.torque_limit).collect(),
            substeps: SUBSTEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kp.len();
        if self.kd.len() != n || self.torque_limit.len() != n {
            return Err(Error::Config("kp, kd and torque_limit lengths differ".into()));
        }
        if self.kp.iter().chain(&self.kd).chain(&self.torque_limit).any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("PD gains and torque limits must be non-negative".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be positive".into()));
        }
        Ok(())
    }
}

/// τ_i = clip(s · (kp_i (q_tg,i − q_i) − kd_i q̇_i), ±limit_i) over the leading joints.
pub fn pd_torque(cfg: &PdConfig, q_tg: &[f64], q: &[f64], qd: &[f64], motor_strength: f64) -> Result<Vec<f64>> {
    let n = q_tg.len();
    if q.len() != n {
        return Err(Error::dim(n, q.len(), "pd_torque q"));
    }
    if qd.len() != n {
        return Err(Error::dim(n, qd.len(), "pd_torque q̇"));
    }
    if n > cfg.kp.len() {
        return Err(Error::dim(cfg.kp.len(), n, "pd_torque joints"));
    }
    Ok((0..n)
        .map(|i| {
            let raw = motor_strength * (cfg.kp[i] * (q_tg[i] - q[i]) - cfg.kd[i] * qd[i]);
            raw.clamp(-cfg.torque_limit[i], cfg.torque_limit[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kp: f64, kd: f64, limit: f64) -> PdConfig {
        PdConfig {
            kp: vec![kp; 19],
            kd: vec![kd; 19],
            torque_limit: vec![limit; 19],
            substeps: SUBSTEPS,
        }
    }

    #[test]
    fn at_setpoint_no_torque() {
        let q = vec![0.3; 19];
        assert!(pd_torque(&cfg(100.0, 5.0, 50.0), &q, &q, &[0.0; 19], 1.0)
            .unwrap()
            .iter()
            .all(|t| *t == 0.0));
    }

    #[test]
    fn proportional_and_clip() {
        let mut tg = vec![0.0; 19];
        tg[0] = 0.1;
        tg[1] = 5.0;
        let t = pd_torque(&cfg(100.0, 0.0, 50.0), &tg, &[0.0; 19], &[0.0; 19], 1.0).unwrap();
        assert!((t[0] - 10.0).abs() < 1e-12);
        assert_eq!(t[1], 50.0);
        let t = pd_torque(&cfg(100.0, 0.0, 50.0), &tg, &[0.0; 19], &[0.0; 19], 0.8).unwrap();
        assert!((t[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(pd_torque(&cfg(1.0, 1.0, 1.0), &[0.0; 19], &[0.0; 18], &[0.0; 19], 1.0).is_err());
    }
}
