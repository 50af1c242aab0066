//! C ABI over the humanplus toolkit.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `hp_*_new`/`hp_*_load` function and released with the matching `hp_*_free`.
//! Fallible calls return an [`HpStatus`]; the message for the most recent
//! failure on the calling thread is available through [`hp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use humanplus::learn::{ShadowPolicy, TokenHistory};
use humanplus::model::{forward_kinematics, HumanoidModel};
use humanplus::motion::{load_motion, MotionSequence};
use humanplus::retarget::{build_target_stream, load_target_stream, RetargetMap, TargetStream};
use humanplus::rotation::Rotation;
use humanplus::simenv::{sample_env_params, HumanoidEnv, ParamRanges, SimConfig};
use humanplus::Error;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Dimension = 5,
    NotReset = 6,
    NonFinite = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for HpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => HpStatus::Io,
            Error::Parse { .. } | Error::Schema { .. } => HpStatus::Parse,
            Error::Dimension { .. } | Error::FrameDimension { .. } => HpStatus::Dimension,
            Error::NotReset => HpStatus::NotReset,
            Error::NonFinite(_) => HpStatus::NonFinite,
            _ => HpStatus::InvalidArgument,
        }
    }
}

/// Kinematic description of a humanoid.
pub struct HpModel(HumanoidModel);

/// Human motion clip.
pub struct HpMotion(MotionSequence);

/// Retargeted per-step humanoid targets.
pub struct HpTargets(TargetStream);

/// Physics environment with its own random stream.
pub struct HpEnv {
    env: HumanoidEnv,
    rng: ChaCha8Rng,
}

/// Shadowing policy together with its token history.
pub struct HpPolicy {
    policy: ShadowPolicy,
    history: TokenHistory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure(HpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(HpStatus::from(&e), e.to_string())
    }
}

fn fail(status: HpStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, recording any error or panic for `hp_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            HpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(HpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(HpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input<'a>(p: *const f64, len: usize, want: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len != want {
        return Err(fail(HpStatus::Dimension, format!("{what}: expected {want} values, got {len}")));
    }
    if p.is_null() {
        return Err(fail(HpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, cap: usize, want: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if cap < want {
        return Err(fail(HpStatus::BufferTooSmall, format!("{what}: need room for {want} values, have {cap}")));
    }
    if p.is_null() {
        return Err(fail(HpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, want))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(HpStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HpStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(HpStatus::NullPointer, "output handle is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn hp_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` as a NUL-terminated string,
/// truncating to `cap - 1` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn hp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates the built-in 33-joint humanoid.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_model_default(out: *mut *mut HpModel) -> HpStatus {
    guard(|| store(out, HpModel(HumanoidModel::default_model())))
}

/// Loads a humanoid description from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_model_load(path: *const c_char, out: *mut *mut HpModel) -> HpStatus {
    guard(|| {
        let model = HumanoidModel::load(path_arg(path)?)?;
        store(out, HpModel(model))
    })
}

/// # Safety
/// `model` must be null or a handle from `hp_model_default`/`hp_model_load`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn hp_model_free(model: *mut HpModel) {
    release(model);
}

/// Number of actuated joints, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_model_num_joints(model: *const HpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_joints())
}

/// Number of links, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_model_num_links(model: *const HpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.links.len())
}

/// Writes the lower and upper joint limits, one value per joint.
///
/// # Safety
/// `lower` and `upper` must each be valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_model_joint_limits(model: *const HpModel, lower: *mut f64, upper: *mut f64, cap: usize) -> HpStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let n = m.num_joints();
        output(lower, cap, n, "lower")?.copy_from_slice(&m.lower_limits());
        output(upper, cap, n, "upper")?.copy_from_slice(&m.upper_limits());
        Ok(())
    })
}

/// Computes world link positions (x, y, z per link) for a base pose given as
/// a position and a (w, x, y, z) quaternion plus joint angles.
///
/// # Safety
/// `base_position` must hold 3 doubles, `base_quaternion` 4, `q` `nq`, and
/// `positions` must be valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_model_forward_kinematics(
    model: *const HpModel,
    base_position: *const f64,
    base_quaternion: *const f64,
    q: *const f64,
    nq: usize,
    positions: *mut f64,
    cap: usize,
) -> HpStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let p = input(base_position, 3, 3, "base_position")?;
        let r = input(base_quaternion, 4, 4, "base_quaternion")?;
        let q = input(q, nq, m.num_joints(), "q")?;
        let rotation = Rotation::from_quaternion(r[0], r[1], r[2], r[3])?;
        let pose = m.pose(Vector3::new(p[0], p[1], p[2]), rotation, q.to_vec());
        let fk = forward_kinematics(m, &pose)?;
        let out = output(positions, cap, 3 * fk.positions.len(), "positions")?;
        for (chunk, x) in out.chunks_exact_mut(3).zip(&fk.positions) {
            chunk.copy_from_slice(x.as_slice());
        }
        Ok(())
    })
}

/// Loads a motion clip in the canonical binary format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_motion_load(path: *const c_char, out: *mut *mut HpMotion) -> HpStatus {
    guard(|| {
        let seq = load_motion(path_arg(path)?)?;
        store(out, HpMotion(seq))
    })
}

/// # Safety
/// `motion` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_motion_free(motion: *mut HpMotion) {
    release(motion);
}

/// # Safety
/// `motion` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_motion_num_frames(motion: *const HpMotion) -> usize {
    motion.as_ref().map_or(0, |m| m.0.len())
}

/// Frame rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `motion` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_motion_fps(motion: *const HpMotion) -> f64 {
    motion.as_ref().map_or(0.0, |m| m.0.fps())
}

/// Retargets a motion onto a model with the built-in map, producing 50 Hz
/// targets.
///
/// # Safety
/// `motion` and `model` must be live handles and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_from_motion(motion: *const HpMotion, model: *const HpModel, out: *mut *mut HpTargets) -> HpStatus {
    guard(|| {
        let seq = &borrow(motion, "motion")?.0;
        let m = &borrow(model, "model")?.0;
        let map = RetargetMap::default_map(m)?;
        store(out, HpTargets(build_target_stream(seq, &map, m)?))
    })
}

/// Loads a saved target stream.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_load(path: *const c_char, out: *mut *mut HpTargets) -> HpStatus {
    guard(|| {
        let stream = load_target_stream(path_arg(path)?)?;
        store(out, HpTargets(stream))
    })
}

/// Targets that hold every joint at `q` for `frames` steps.
///
/// # Safety
/// `q` must hold `nq` doubles and `out` be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_standing(q: *const f64, nq: usize, frames: usize, out: *mut *mut HpTargets) -> HpStatus {
    guard(|| {
        let q = input(q, nq, nq, "q")?;
        if frames == 0 {
            return Err(fail(HpStatus::InvalidArgument, "frames must be positive"));
        }
        store(out, HpTargets(TargetStream::standing("standing", q, frames)))
    })
}

/// # Safety
/// `targets` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_free(targets: *mut HpTargets) {
    release(targets);
}

/// # Safety
/// `targets` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_len(targets: *const HpTargets) -> usize {
    targets.as_ref().map_or(0, |t| t.0.len())
}

/// Writes the joint targets of one frame.
///
/// # Safety
/// `q` must be valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_targets_joint_positions(targets: *const HpTargets, frame: usize, q: *mut f64, cap: usize) -> HpStatus {
    guard(|| {
        let t = &borrow(targets, "targets")?.0;
        let f = t
            .frames
            .get(frame)
            .ok_or_else(|| fail(HpStatus::InvalidArgument, format!("frame {frame} out of range (len {})", t.len())))?;
        let joints = f.joint_targets();
        output(q, cap, joints.len(), "q")?.copy_from_slice(&joints);
        Ok(())
    })
}

/// Creates an environment with the default simulation settings.
///
/// # Safety
/// `model` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_env_new(model: *const HpModel, seed: u64, out: *mut *mut HpEnv) -> HpStatus {
    guard(|| {
        let m = borrow(model, "model")?.0.clone();
        let env = HumanoidEnv::new(m, SimConfig::default())?;
        store(
            out,
            HpEnv {
                env,
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
        )
    })
}

/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_env_free(env: *mut HpEnv) {
    release(env);
}

/// Proprioception length of the environment observation.
#[no_mangle]
pub extern "C" fn hp_env_proprio_dim() -> usize {
    humanplus::simenv::PROPRIO_DIM
}

/// Target token length of the environment observation.
#[no_mangle]
pub extern "C" fn hp_env_target_dim() -> usize {
    humanplus::retarget::TARGET_DIM
}

/// Body action length accepted by `hp_env_step`.
#[no_mangle]
pub extern "C" fn hp_env_action_dim() -> usize {
    humanplus::model::BODY.len()
}

/// Starts an episode on `targets` with freshly sampled physical parameters
/// and writes the first proprioception.
///
/// # Safety
/// `env` and `targets` must be live handles and `proprio` valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_env_reset(env: *mut HpEnv, targets: *const HpTargets, proprio: *mut f64, cap: usize) -> HpStatus {
    guard(|| {
        let e = borrow_mut(env, "env")?;
        let stream = borrow(targets, "targets")?.0.clone();
        let params = sample_env_params(&mut e.rng, &ParamRanges::default())?;
        let p = e.env.reset(stream, params, &mut e.rng)?;
        output(proprio, cap, p.len(), "proprio")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Advances one policy step. `done` is set to 1 when the episode ended.
///
/// # Safety
/// `action` must hold `n_action` doubles; `proprio` and `target` must be
/// valid for their capacities; `reward` and `done` must be valid for one write.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hp_env_step(
    env: *mut HpEnv,
    action: *const f64,
    n_action: usize,
    proprio: *mut f64,
    proprio_cap: usize,
    target: *mut f64,
    target_cap: usize,
    reward: *mut f64,
    done: *mut i32,
) -> HpStatus {
    guard(|| {
        let e = borrow_mut(env, "env")?;
        let a = input(action, n_action, hp_env_action_dim(), "action")?;
        let reward = borrow_mut(reward, "reward")?;
        let done = borrow_mut(done, "done")?;
        let step = e.env.step(a)?;
        output(proprio, proprio_cap, step.proprio.len(), "proprio")?.copy_from_slice(&step.proprio);
        output(target, target_cap, step.target.len(), "target")?.copy_from_slice(&step.target);
        *reward = step.reward.total;
        *done = i32::from(step.done);
        Ok(())
    })
}

/// Loads a shadowing policy checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hp_policy_load(path: *const c_char, out: *mut *mut HpPolicy) -> HpStatus {
    guard(|| {
        let (policy, _) = humanplus::cli::load_shadow(&path_arg(path)?)?;
        let history = TokenHistory::new(policy.cfg.context_length);
        store(out, HpPolicy { policy, history })
    })
}

/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_policy_free(policy: *mut HpPolicy) {
    release(policy);
}

/// Forgets the token history, as at the start of an episode.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_policy_reset(policy: *mut HpPolicy) -> HpStatus {
    guard(|| {
        borrow_mut(policy, "policy")?.history.clear();
        Ok(())
    })
}

/// Appends one (proprioception, target) token and writes the mean action.
///
/// # Safety
/// `proprio` and `target` must hold their stated lengths and `action` must
/// be valid for `action_cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_policy_act(
    policy: *mut HpPolicy,
    proprio: *const f64,
    n_proprio: usize,
    target: *const f64,
    n_target: usize,
    action: *mut f64,
    action_cap: usize,
) -> HpStatus {
    guard(|| {
        let p = borrow_mut(policy, "policy")?;
        let cfg = &p.policy.cfg;
        let proprio = input(proprio, n_proprio, cfg.proprio_dim, "proprio")?;
        let target = input(target, n_target, cfg.target_dim, "target")?;
        let out = output(action, action_cap, cfg.action_dim, "action")?;
        if proprio.iter().chain(target).any(|v| !v.is_finite()) {
            return Err(fail(HpStatus::NonFinite, "observation contains a non-finite value"));
        }
        p.history.push(ShadowPolicy::token(proprio, target));
        out.copy_from_slice(&p.history.act(&p.policy)?);
        Ok(())
    })
}
