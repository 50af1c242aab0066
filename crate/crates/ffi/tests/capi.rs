use std::ffi::{c_char, CStr, CString};
use std::ptr;

use humanplus::cli::run;
use humanplus_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { hp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn default_model() -> *mut HpModel {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hp_model_default(&mut model) }, HpStatus::Ok);
    model
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_queries_and_kinematics() {
    let model = default_model();
    let n = unsafe { hp_model_num_joints(model) };
    assert_eq!(n, 33);
    let (mut lo, mut hi) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { hp_model_joint_limits(model, lo.as_mut_ptr(), hi.as_mut_ptr(), n) }, HpStatus::Ok);
    assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));

    let links = unsafe { hp_model_num_links(model) };
    let mut positions = vec![0.0; 3 * links];
    let base = [1.0, -2.0, 0.9];
    let quat = [1.0, 0.0, 0.0, 0.0];
    let q = vec![0.0; n];
    let status = unsafe {
        hp_model_forward_kinematics(model, base.as_ptr(), quat.as_ptr(), q.as_ptr(), n, positions.as_mut_ptr(), positions.len())
    };
    assert_eq!(status, HpStatus::Ok);
    assert!(positions.iter().all(|v| v.is_finite()));

    let mut short = vec![0.0; 3];
    let status = unsafe { hp_model_forward_kinematics(model, base.as_ptr(), quat.as_ptr(), q.as_ptr(), n, short.as_mut_ptr(), 3) };
    assert_eq!(status, HpStatus::BufferTooSmall);
    let status = unsafe { hp_model_forward_kinematics(model, base.as_ptr(), quat.as_ptr(), q.as_ptr(), n - 1, positions.as_mut_ptr(), positions.len()) };
    assert_eq!(status, HpStatus::Dimension);
    assert!(last_error().contains("expected 33"));
    unsafe { hp_model_free(model) };
}

#[test]
fn null_handles_and_missing_files() {
    assert_eq!(unsafe { hp_model_num_joints(ptr::null()) }, 0);
    assert_eq!(unsafe { hp_model_default(ptr::null_mut()) }, HpStatus::NullPointer);
    let mut motion = ptr::null_mut();
    let path = CString::new("/nonexistent/clip.hpm").unwrap();
    assert_eq!(unsafe { hp_motion_load(path.as_ptr(), &mut motion) }, HpStatus::Io);
    assert!(motion.is_null());
    assert!(last_error().contains("/nonexistent/clip.hpm"));
    let len = hp_last_error_length();
    let mut tiny = [1 as c_char; 4];
    assert_eq!(unsafe { hp_last_error_message(tiny.as_mut_ptr(), tiny.len()) }, len);
    assert_eq!(tiny[3], 0);
    unsafe {
        hp_model_free(ptr::null_mut());
        hp_motion_free(ptr::null_mut());
    }
}

#[test]
fn environment_episode_through_the_c_interface() {
    let model = default_model();
    let q = vec![0.0; 33];
    let mut targets = ptr::null_mut();
    assert_eq!(unsafe { hp_targets_standing(q.as_ptr(), q.len(), 100, &mut targets) }, HpStatus::Ok);
    assert_eq!(unsafe { hp_targets_len(targets) }, 100);
    let mut joints = vec![1.0; 33];
    assert_eq!(unsafe { hp_targets_joint_positions(targets, 5, joints.as_mut_ptr(), 33) }, HpStatus::Ok);
    assert!(joints.iter().all(|v| *v == 0.0));
    assert_eq!(unsafe { hp_targets_joint_positions(targets, 100, joints.as_mut_ptr(), 33) }, HpStatus::InvalidArgument);

    let mut env = ptr::null_mut();
    assert_eq!(unsafe { hp_env_new(model, 7, &mut env) }, HpStatus::Ok);
    let (pd, td, ad) = (hp_env_proprio_dim(), hp_env_target_dim(), hp_env_action_dim());
    let mut proprio = vec![0.0; pd];
    let mut target = vec![0.0; td];
    let action = vec![0.0; ad];
    let (mut reward, mut done) = (0.0, 0);
    let status = unsafe {
        hp_env_step(env, action.as_ptr(), ad, proprio.as_mut_ptr(), pd, target.as_mut_ptr(), td, &mut reward, &mut done)
    };
    assert_eq!(status, HpStatus::NotReset);
    assert_eq!(unsafe { hp_env_reset(env, targets, proprio.as_mut_ptr(), pd) }, HpStatus::Ok);
    for _ in 0..10 {
        let status = unsafe {
            hp_env_step(env, action.as_ptr(), ad, proprio.as_mut_ptr(), pd, target.as_mut_ptr(), td, &mut reward, &mut done)
        };
        assert_eq!(status, HpStatus::Ok);
        assert!(reward.is_finite());
        assert_eq!(done, 0);
    }
    unsafe {
        hp_env_free(env);
        hp_targets_free(targets);
        hp_model_free(model);
    }
}

#[test]
fn policy_from_a_cli_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/stand.toml");
    let root = dir.path().display().to_string();
    let args: Vec<String> = [
        "humanplus",
        "--config",
        config,
        "--set",
        &format!("paths.checkpoints={root}/ck"),
        "--set",
        &format!("paths.logs={root}/logs"),
        "--set",
        "train.iterations=1",
        "--set",
        "ppo.rollout_steps=10",
        "--set",
        "ppo.envs_per_worker=2",
        "--set",
        "ppo.minibatch_size=20",
        "--set",
        "ppo.epochs=1",
        "train-shadow",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(run(&args, &mut out, &mut err), 0, "{}", String::from_utf8_lossy(&err));

    let path = CString::new(format!("{root}/ck/shadow.hpck")).unwrap();
    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { hp_policy_load(path.as_ptr(), &mut policy) }, HpStatus::Ok, "{}", last_error());
    let proprio = vec![0.0; hp_env_proprio_dim()];
    let target = vec![0.0; hp_env_target_dim()];
    let mut first = vec![0.0; hp_env_action_dim()];
    let mut again = vec![0.0; hp_env_action_dim()];
    let act = |policy, out: &mut Vec<f64>| unsafe {
        hp_policy_act(policy, proprio.as_ptr(), proprio.len(), target.as_ptr(), target.len(), out.as_mut_ptr(), out.len())
    };
    assert_eq!(act(policy, &mut first), HpStatus::Ok);
    assert_eq!(unsafe { hp_policy_reset(policy) }, HpStatus::Ok);
    assert_eq!(act(policy, &mut again), HpStatus::Ok);
    assert_eq!(first, again);
    let bad = vec![f64::NAN; proprio.len()];
    let status = unsafe {
        hp_policy_act(policy, bad.as_ptr(), bad.len(), target.as_ptr(), target.len(), first.as_mut_ptr(), first.len())
    };
    assert_eq!(status, HpStatus::NonFinite);
    unsafe { hp_policy_free(policy) };
}
