//! Reduced-order humanoid simulator.
//!
//! Joints are independent second-order systems driven by PD torque with
//! per-joint effective inertia and viscous damping. The whole robot moves as
//! one floating rigid body whose mass distribution follows forward
//! kinematics; gravity acts at the composite center of mass and the ground
//! pushes back through spring-damper sole points with a Coulomb cap on the
//! tangential force. Joint motion moves the sole points but ground forces
//! never feed back into the joints.

mod params;
mod pd;
mod reward;
mod state;
pub mod toy;
mod trajectory;

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_target_segment, MotionDataset};
use crate::error::{Error, Result};
use crate::model::{forward_kinematics, HumanoidModel, HumanoidPose, Link, LinkTransforms, BODY, NUM_BODY_JOINTS};
use crate::retarget::{target_contact, ContactThresholds, TargetStream, POLICY_RATE};
use crate::rotation::Rotation;

pub use params::{sample_env_params, EnvParams, ParamRanges, Range};
pub use pd::{pd_torque, PdConfig, SUBSTEPS};
pub use reward::{
    check_termination, compute_rewards, termination_reason, RewardBreakdown, RewardWeights, Termination,
    TerminationLimits, CONTACT_FORCE_THRESHOLD, REWARD_TERMS,
};
pub use state::{FootContact, SimState, PROPRIO_DIM};
pub use trajectory::{read_trajectory, write_trajectory, TrajectoryRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvironmentDims {
    pub proprio: usize,
    pub target: usize,
    pub action: usize,
}

/// Episode interface driven by rollout workers.
pub trait Environment {
    fn dims(&self) -> EnvironmentDims;
    /// Starts a new episode; returns the first (proprioception, target) tokens.
    fn reset_episode(&mut self, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
}

/// Shadowing task: random target segments under randomized physics.
pub struct ShadowTask {
    pub env: HumanoidEnv,
    pub dataset: MotionDataset,
    pub ranges: ParamRanges,
    /// Segment length in policy steps; whole streams when `None`.
    pub segment: Option<usize>,
}

impl ShadowTask {
    pub fn new(env: HumanoidEnv, dataset: MotionDataset, ranges: ParamRanges, segment: Option<usize>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("shadow task needs at least one target stream".into()));
        }
        ranges.validate()?;
        Ok(ShadowTask {
            env,
            dataset,
            ranges,
            segment,
        })
    }
}

impl Environment for ShadowTask {
    fn dims(&self) -> EnvironmentDims {
        EnvironmentDims {
            proprio: PROPRIO_DIM,
            target: crate::retarget::TARGET_DIM,
            action: NUM_BODY_JOINTS,
        }
    }

    fn reset_episode(&mut self, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        let stream = match self.segment {
            Some(h) => {
                let frames = sample_target_segment(&self.dataset, h, rng)?;
                TargetStream::new("segment", frames)
            }
            None => self.dataset.streams[rng.gen_range(0..self.dataset.len())].clone(),
        };
        let params = sample_env_params(rng, &self.ranges)?;
        self.env.reset(stream, params, rng)?;
        self.env.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.env.step(action)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResetNoise {
    /// Uniform half-width on body joint angles, rad.
    pub joint: f64,
    /// Uniform half-width on body joint and base linear velocities.
    pub velocity: f64,
}

impl Default for ResetNoise {
    fn default() -> Self {
        ResetNoise {
            joint: 0.05,
            velocity: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Inner-loop period, s.
    pub dt: f64,
    pub substeps: usize,
    /// m/s², pointing down.
    pub gravity: f64,
    pub contacts_enabled: bool,
    /// N/m per sole point.
    pub contact_stiffness: f64,
    /// N s/m per sole point, normal direction.
    pub contact_damping: f64,
    /// N s/m per sole point, tangential direction, before the Coulomb cap.
    pub tangential_damping: f64,
    pub weights: RewardWeights,
    pub termination: TerminationLimits,
    pub reset_noise: ResetNoise,
    pub contact_thresholds: ContactThresholds,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.001,
            substeps: SUBSTEPS,
            gravity: 9.81,
            contacts_enabled: true,
            contact_stiffness: 5e4,
            contact_damping: 800.0,
            tangential_damping: 500.0,
            weights: RewardWeights::default(),
            termination: TerminationLimits::default(),
            reset_noise: ResetNoise::default(),
            contact_thresholds: ContactThresholds::default(),
        }
    }
}

impl SimConfig {
    pub fn policy_dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.substeps == 0 {
            return Err(Error::Config("dt and substeps must be positive".into()));
        }
        let rate = 1.0 / self.policy_dt();
        if (rate - POLICY_RATE).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "dt × substeps must give the {POLICY_RATE} Hz policy rate, got {rate} Hz"
            )));
        }
        if self.contact_stiffness < 0.0 || self.contact_damping < 0.0 || self.tangential_damping < 0.0 {
            return Err(Error::Config("contact coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// One PD evaluation, recorded when probing is enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct TickProbe {
    pub tick: u64,
    /// Policy step whose action was in effect, `None` for the reset setpoint.
    pub action_step: Option<u64>,
    /// Body torques of this tick.
    pub tau: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub proprio: Vec<f64>,
    /// Target token for the next step (the last frame once the stream ends).
    pub target: Vec<f64>,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub termination: Option<Termination>,
    /// Non-finite state; the episode ends.
    pub fault: bool,
    /// The target stream ran out.
    pub stream_end: bool,
}

struct PendingAction {
    tick: u64,
    step: u64,
    setpoint: Vec<f64>,
}

struct Push {
    force: Vector3<f64>,
    ticks_left: u64,
}

/// Mass properties with the episode's payloads applied.
#[derive(Clone, Debug)]
struct MassModel {
    links: Vec<Link>,
    total: f64,
}

impl MassModel {
    fn new(model: &HumanoidModel, p: &EnvParams) -> Self {
        let mut links = model.links.clone();
        let base = &mut links[model.root_link];
        let old = base.mass;
        base.mass = (old + p.base_payload).max(0.1 * old);
        base.com += Vector3::from(p.com_offset);
        for &e in &model.end_effectors {
            links[e].mass += p.ee_payload;
        }
        let total = links.iter().map(|l| l.mass).sum();
        MassModel { links, total }
    }

    fn com(&self, fk: &LinkTransforms) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            acc += l.mass * (fk.positions[i] + fk.rotations[i].rotate(&l.com));
        }
        acc / self.total
    }

    fn inertia_about(&self, fk: &LinkTransforms, point: &Vector3<f64>) -> Matrix3<f64> {
        let mut acc = Matrix3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            let r = fk.rotations[i].matrix();
            let c = fk.positions[i] + r * l.com - point;
            acc += r * l.inertia * r.transpose() + l.mass * (Matrix3::identity() * c.dot(&c) - c * c.transpose());
        }
        acc
    }
}

pub struct HumanoidEnv {
    model: HumanoidModel,
    cfg: SimConfig,
    pd: PdConfig,
    params: EnvParams,
    mass: MassModel,
    state: Option<SimState>,
    targets: TargetStream,
    index: usize,
    steps: u64,
    tick: u64,
    delay_ticks: u64,
    queue: VecDeque<PendingAction>,
    setpoint: Vec<f64>,
    setpoint_step: Option<u64>,
    push: Option<Push>,
    pinned: bool,
    done: bool,
    prev_contact_points: Option<[Vec<Vector3<f64>>; 2]>,
    prev_feet: Option<[Vector3<f64>; 2]>,
    probe: Option<Vec<TickProbe>>,
    pd_evaluations: u64,
    log: Option<Vec<TrajectoryRecord>>,
}

impl HumanoidEnv {
    pub fn new(model: HumanoidModel, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let pd = PdConfig::from_model(&model);
        pd.validate()?;
        let params = EnvParams::default();
        let mass = MassModel::new(&model, &params);
        let q0 = vec![0.0; model.num_joints()];
        Ok(HumanoidEnv {
            targets: TargetStream::standing("idle", &q0, 1),
            model,
            cfg,
            pd,
            params,
            mass,
            state: None,
            index: 0,
            steps: 0,
            tick: 0,
            delay_ticks: 0,
            queue: VecDeque::new(),
            setpoint: vec![0.0; NUM_BODY_JOINTS],
            setpoint_step: None,
            push: None,
            pinned: false,
            done: false,
            prev_contact_points: None,
            prev_feet: None,
            probe: None,
            pd_evaluations: 0,
            log: None,
        })
    }

    pub fn model(&self) -> &HumanoidModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn pd_config(&self) -> &PdConfig {
        &self.pd
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> Result<&SimState> {
        self.state.as_ref().ok_or(Error::NotReset)
    }

    pub fn targets(&self) -> &TargetStream {
        &self.targets
    }

    /// Index of the target frame the next action is conditioned on.
    pub fn target_index(&self) -> usize {
        self.index
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn delay_ticks(&self) -> u64 {
        self.delay_ticks
    }

    pub fn pd_evaluations(&self) -> u64 {
        self.pd_evaluations
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    /// Records every PD evaluation from now on.
    pub fn enable_probe(&mut self) {
        self.probe = Some(Vec::new());
    }

    pub fn take_probe(&mut self) -> Vec<TickProbe> {
        self.probe.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Records one trajectory row per policy step from now on.
    pub fn enable_log(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn take_log(&mut self) -> Vec<TrajectoryRecord> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn current_target_token(&self) -> Vec<f64> {
        self.targets.frames[self.index.min(self.targets.len() - 1)].pose.to_vec()
    }

    /// Body setpoints of the current target frame (the residual base for policies).
    pub fn target_body_q(&self) -> &[f64] {
        &self.targets.frames[self.index.min(self.targets.len() - 1)].pose.q
    }

    pub fn observation(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.state()?.proprioception(), self.current_target_token()))
    }

    /// Starts an episode at the first target frame with uniform noise.
    pub fn reset(&mut self, targets: TargetStream, params: EnvParams, rng: &mut impl Rng) -> Result<Vec<f64>> {
        if targets.is_empty() {
            return Err(Error::Empty("target stream has no frames".into()));
        }
        let first = &targets.frames[0];
        if first.pose.q.len() != NUM_BODY_JOINTS || first.joint_targets().len() != self.model.num_joints() {
            return Err(Error::dim(self.model.num_joints(), first.joint_targets().len(), "target frame"));
        }
        self.mass = MassModel::new(&self.model, &params);
        self.delay_ticks = (params.control_delay / self.cfg.dt).round() as u64;
        self.params = params;

        let noise = &self.cfg.reset_noise;
        let mut uniform = |h: f64| if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 };
        let q_target = first.joint_targets();
        let mut q = q_target.clone();
        for v in &mut q[BODY] {
            *v += uniform(noise.joint);
        }
        let q = self.model.clamp_to_limits(&q);
        let mut qd = vec![0.0; q.len()];
        for v in &mut qd[BODY] {
            *v = uniform(noise.velocity);
        }
        let base_velocity = Vector3::new(uniform(noise.velocity), uniform(noise.velocity), uniform(noise.velocity));

        let base_rotation = Rotation::from_euler(first.pose.roll, first.pose.pitch, 0.0)?;
        let mut pose = HumanoidPose {
            base_position: Vector3::zeros(),
            base_rotation,
            q: q.clone(),
        };
        let fk = forward_kinematics(&self.model, &pose)?;
        pose.base_position.z = -self.model.min_contact_height(&fk);

        self.targets = targets;
        self.index = 0;
        self.steps = 0;
        self.tick = 0;
        self.queue.clear();
        self.setpoint = q_target[BODY].to_vec();
        self.setpoint_step = None;
        self.push = None;
        self.pinned = false;
        self.done = false;
        self.prev_contact_points = None;
        self.prev_feet = None;
        self.pd_evaluations = 0;
        if let Some(p) = &mut self.probe {
            p.clear();
        }
        if let Some(l) = &mut self.log {
            l.clear();
        }
        self.state = Some(SimState {
            base_position: pose.base_position,
            base_rotation,
            base_linear_velocity: base_velocity,
            base_angular_velocity: Vector3::zeros(),
            tau: vec![0.0; q.len()],
            q,
            qd,
            contacts: [FootContact::default(); 2],
            last_action: self.setpoint.clone(),
            time: 0.0,
        });
        // contact readings for the initial observation
        let fk = self.fk()?;
        self.contact_forces(&fk, false);
        Ok(self.state()?.proprioception())
    }

    /// Adds `force` (world frame, N) at the pelvis for `duration` seconds.
    pub fn apply_push(&mut self, force: Vector3<f64>, duration: f64) {
        let ticks = (duration / self.cfg.dt).round() as u64;
        self.push = (ticks > 0).then_some(Push { force, ticks_left: ticks });
    }

    /// Releases a pinned base; velocities stay zero so the pose is continuous.
    pub fn unpin(&mut self) {
        self.pinned = false;
        self.prev_contact_points = None;
        self.prev_feet = None;
    }

    fn fk(&self) -> Result<LinkTransforms> {
        let s = self.state()?;
        forward_kinematics(
            &self.model,
            &HumanoidPose {
                base_position: s.base_position,
                base_rotation: s.base_rotation,
                q: s.q.clone(),
            },
        )
    }

    /// Per-point ground forces; updates the contact readings in the state.
    fn contact_forces(&mut self, fk: &LinkTransforms, advance: bool) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let points = self.model.contact_points(fk);
        let feet = fk.foot_positions(&self.model);
        let dt = self.cfg.dt;
        let prev_points = self.prev_contact_points.clone().unwrap_or_else(|| points.clone());
        let prev_feet = self.prev_feet.unwrap_or(feet);
        let mu = self.params.friction;
        let mut forces = Vec::with_capacity(8);
        let mut readings = [FootContact::default(); 2];
        for side in 0..2 {
            let mut normal = 0.0;
            for (p, p0) in points[side].iter().zip(&prev_points[side]) {
                let depth = -p.z;
                if !self.cfg.contacts_enabled || depth <= 0.0 {
                    continue;
                }
                let v = (p - p0) / dt;
                let fn_ = (self.cfg.contact_stiffness * depth - self.cfg.contact_damping * v.z).max(0.0);
                let mut ft = Vector3::new(-v.x, -v.y, 0.0) * self.cfg.tangential_damping;
                let cap = mu * fn_;
                let mag = ft.norm();
                if mag > cap {
                    ft *= cap / mag;
                }
                normal += fn_;
                forces.push((*p, Vector3::new(ft.x, ft.y, fn_)));
            }
            let fv = (feet[side] - prev_feet[side]) / dt;
            readings[side] = FootContact {
                in_contact: normal > CONTACT_FORCE_THRESHOLD,
                normal_force: normal,
                planar_velocity: [fv.x, fv.y],
            };
        }
        if advance {
            self.prev_contact_points = Some(points);
            self.prev_feet = Some(feet);
        }
        if let Some(s) = self.state.as_mut() {
            s.contacts = readings;
        }
        forces
    }

    /// One 1 kHz tick with the given full-length setpoint.
    fn tick_once(&mut self, setpoint: &[f64]) -> Result<()> {
        let fk = self.fk()?;
        let forces = if self.pinned {
            Vec::new()
        } else {
            self.contact_forces(&fk, true)
        };
        let dt = self.cfg.dt;
        let strength = self.params.motor_strength;
        let s = self.state.as_mut().expect("reset checked by fk");
        let tau = pd_torque(&self.pd, setpoint, &s.q, &s.qd, strength)?;
        self.pd_evaluations += 1;
        if let Some(p) = &mut self.probe {
            p.push(TickProbe {
                tick: self.tick,
                action_step: self.setpoint_step,
                tau: tau[BODY].to_vec(),
            });
        }
        for (j, joint) in self.model.joints.iter().enumerate() {
            let acc = (tau[j] - joint.damping * s.qd[j]) / joint.effective_inertia;
            s.qd[j] += acc * dt;
            s.q[j] += s.qd[j] * dt;
            if s.q[j] < joint.lower {
                s.q[j] = joint.lower;
                s.qd[j] = s.qd[j].max(0.0);
            } else if s.q[j] > joint.upper {
                s.q[j] = joint.upper;
                s.qd[j] = s.qd[j].min(0.0);
            }
        }
        s.tau = tau;

        if self.pinned {
            s.base_linear_velocity = Vector3::zeros();
            s.base_angular_velocity = Vector3::zeros();
        } else {
            let com = self.mass.com(&fk);
            let mut force = Vector3::new(0.0, 0.0, -self.mass.total * self.cfg.gravity);
            let mut torque = Vector3::zeros();
            for (p, f) in &forces {
                force += f;
                torque += (p - com).cross(f);
            }
            if let Some(push) = &mut self.push {
                force += push.force;
                torque += (s.base_position - com).cross(&push.force);
                push.ticks_left -= 1;
                if push.ticks_left == 0 {
                    self.push = None;
                }
            }
            let inertia = self.mass.inertia_about(&fk, &com);
            let w = s.base_angular_velocity;
            let w_dot = inertia
                .try_inverse()
                .ok_or_else(|| Error::NonFinite("singular composite inertia".into()))?
                * (torque - w.cross(&(inertia * w)));
            let r = com - s.base_position;
            let v_com = s.base_linear_velocity + w.cross(&r) + force / self.mass.total * dt;
            let w_new = w + w_dot * dt;
            let v_new = v_com - w_new.cross(&r);
            s.base_position += 0.5 * (s.base_linear_velocity + v_new) * dt;
            s.base_linear_velocity = v_new;
            s.base_angular_velocity = w_new;
            s.base_rotation = Rotation::from_axis_angle(&w_new, w_new.norm() * dt) * s.base_rotation;
        }
        self.tick += 1;
        s.time = self.tick as f64 * dt;
        Ok(())
    }

    fn full_setpoint(&self) -> Vec<f64> {
        let frame = &self.targets.frames[self.index.min(self.targets.len() - 1)];
        let mut sp = self.setpoint.clone();
        sp.extend(frame.wrists);
        sp.extend(&frame.hands);
        sp
    }

    /// One 50 Hz policy step with a 19-dim body setpoint.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.state.is_none() {
            return Err(Error::NotReset);
        }
        if self.done {
            return Err(Error::InvalidArgument("episode finished; call reset".into()));
        }
        if action.len() != NUM_BODY_JOINTS {
            return Err(Error::dim(NUM_BODY_JOINTS, action.len(), "action"));
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action".into()));
        }
        self.queue.push_back(PendingAction {
            tick: self.tick + self.delay_ticks,
            step: self.steps,
            setpoint: action.to_vec(),
        });
        self.state.as_mut().expect("checked").last_action = action.to_vec();
        let mut fault = false;
        for _ in 0..self.cfg.substeps {
            while self.queue.front().is_some_and(|a| a.tick <= self.tick) {
                let a = self.queue.pop_front().expect("front exists");
                self.setpoint = a.setpoint;
                self.setpoint_step = Some(a.step);
            }
            let sp = self.full_setpoint();
            self.tick_once(&sp)?;
            if !self.state()?.is_finite() {
                fault = true;
                break;
            }
        }
        self.finish_step(fault)
    }

    fn finish_step(&mut self, fault: bool) -> Result<StepOutcome> {
        let k = self.index.min(self.targets.len() - 1);
        let c_tg = target_contact(&self.targets, k, &self.cfg.contact_thresholds);
        let state = self.state.as_ref().expect("reset");
        let target = &self.targets.frames[k].pose;
        let mut reward = compute_rewards(state, target, c_tg, &self.cfg.weights);
        let termination = if fault {
            None
        } else {
            termination_reason(state, &self.cfg.termination, self.cfg.policy_dt())
        };
        let failed = fault || termination.is_some_and(Termination::is_failure);
        if failed {
            reward = reward.with_alive(0.0, &self.cfg.weights);
        }
        self.steps += 1;
        self.index += 1;
        let stream_end = self.index >= self.targets.len();
        self.done = fault || termination.is_some() || stream_end;
        if let Some(log) = &mut self.log {
            log.push(TrajectoryRecord::new(self.steps - 1, state, &reward, self.done, fault));
        }
        Ok(StepOutcome {
            proprio: state.proprioception(),
            target: self.current_target_token(),
            reward,
            done: self.done,
            termination,
            fault,
            stream_end,
        })
    }

    /// Replaces the target frame the next step tracks; the stream keeps its length.
    pub fn override_target(&mut self, target: crate::retarget::WholeBodyTarget) -> Result<()> {
        if self.state.is_none() {
            return Err(Error::NotReset);
        }
        let n = target.joint_targets().len();
        if target.pose.q.len() != NUM_BODY_JOINTS || n != self.model.num_joints() {
            return Err(Error::dim(self.model.num_joints(), n, "whole-body target"));
        }
        let k = self.index.min(self.targets.len() - 1);
        self.targets.frames[k] = target;
        Ok(())
    }

    /// Seated mode: the base is pinned and the full 33-joint target goes
    /// straight to the PD loop for one policy period, bypassing policy and delay.
    pub fn sit_mode_passthrough(&mut self, target: &crate::retarget::WholeBodyTarget) -> Result<()> {
        if self.state.is_none() {
            return Err(Error::NotReset);
        }
        let sp = target.joint_targets();
        if sp.len() != self.model.num_joints() {
            return Err(Error::dim(self.model.num_joints(), sp.len(), "whole-body target"));
        }
        self.pinned = true;
        self.setpoint = sp[BODY].to_vec();
        self.queue.clear();
        for _ in 0..self.cfg.substeps {
            self.tick_once(&sp)?;
        }
        Ok(())
    }
}
