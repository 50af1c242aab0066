//! Command-line entry points. Each command returns a process exit code:
//! 0 success, 1 other failure, 2 unreadable or invalid input, 3 inputs that
//! do not fit together, 4 non-finite training loss.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{filter_sequence, load_demonstration, percentile, Demonstration, MotionDataset};
use crate::error::{Error, Result};
use crate::learn::{
    deploy_loop, evaluate, imitation_errors, load_checkpoint, save_checkpoint, train_imitation, Adam, Checkpoint,
    CheckpointMeta, DType, FeatureOracle, HitConfig, HitPolicy, PpoTrainer, PushSpec, ShadowPolicy, ShadowPolicyConfig,
    SyntheticTask,
};
use crate::model::HumanoidModel;
use crate::motion::{load_motion, MotionSequence};
use crate::pipeline::PipelineConfig;
use crate::retarget::{build_target_stream, load_target_stream, retarget_frame_unclamped, save_target_stream, RetargetMap, TargetStream, POLICY_RATE};
use crate::simenv::{HumanoidEnv, ShadowTask, PROPRIO_DIM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_NON_FINITE: i32 = 4;

pub const SHADOW_CHECKPOINT: &str = "shadow.hpck";
pub const HIT_CHECKPOINT: &str = "hit.hpck";

#[derive(Parser, Debug)]
#[command(name = "humanplus", version, about = "Retarget human motion, train and run humanoid shadowing and imitation policies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rollout workers for training.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Field override `section.field=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Retarget one motion file into a 50 Hz whole-body target stream.
    Retarget {
        motion: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Apply the feasibility filter to motion files.
    Filter {
        /// Motion files; the configured corpus when empty.
        motions: Vec<PathBuf>,
        /// Writes the target stream of every accepted motion here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the shadowing policy with PPO.
    TrainShadow {
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Train the imitation policy on demonstrations.
    TrainImitate {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Roll out a shadowing policy and report rewards, falls and recovery.
    Eval {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Lateral pelvis push in N.
        #[arg(long)]
        push_force: Option<f64>,
        #[arg(long, default_value_t = 250)]
        push_step: usize,
        #[arg(long, default_value_t = 0.1)]
        push_duration: f64,
        /// Writes every trajectory record as JSON lines.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run the imitation policy on top of the shadowing policy.
    Deploy {
        #[arg(long)]
        shadow: Option<PathBuf>,
        #[arg(long)]
        hit: Option<PathBuf>,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Writes the instrumented trace as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::NonFinite(_) => EXIT_NON_FINITE,
            Error::IncompleteMap { .. } | Error::Dimension { .. } => EXIT_MISMATCH,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::FrameDimension { .. }
            | Error::Tree(_)
            | Error::Limits { .. }
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Empty(_)
            | Error::TooShort { .. } => EXIT_INPUT,
            _ => EXIT_FAILURE,
        };
        Failure { code, error }
    }
}

fn mismatch(error: Error) -> Failure {
    match error {
        e @ (Error::Io { .. } | Error::Schema { .. } | Error::Parse { .. }) => e.into(),
        e => Failure {
            code: EXIT_MISMATCH,
            error: e,
        },
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CmdResult {
    let mut cfg = PipelineConfig::load(cli.global.config.as_deref(), &cli.global.overrides)?;
    if let Some(s) = cli.global.seed {
        cfg.seeds.train = s;
        cfg.seeds.eval = s;
    }
    if let Some(w) = cli.global.workers {
        cfg.train.workers = w;
    }
    match cli.command {
        Command::Retarget { motion, out: path, map, model } => {
            cfg.paths.model = model.or(cfg.paths.model);
            cfg.paths.retarget_map = map.or(cfg.paths.retarget_map);
            cmd_retarget(&cfg, &motion, &path, out)
        }
        Command::Filter { motions, out_dir } => {
            if !motions.is_empty() {
                cfg.paths.motions = motions;
            }
            cmd_filter(&cfg, out_dir.as_deref(), out)
        }
        Command::TrainShadow { resume, iterations } => {
            if let Some(n) = iterations {
                cfg.train.iterations = n;
            }
            cmd_train_shadow(&cfg, resume.as_deref(), out)
        }
        Command::TrainImitate { epochs } => {
            if let Some(n) = epochs {
                cfg.imitation.epochs = n;
            }
            cmd_train_imitate(&cfg, out)
        }
        Command::Eval {
            policy,
            targets,
            episodes,
            push_force,
            push_step,
            push_duration,
            dump,
        } => {
            cfg.paths.targets = targets.or(cfg.paths.targets);
            if let Some(n) = episodes {
                cfg.eval.episodes = n;
            }
            if let Some(f) = push_force {
                cfg.eval.push = Some(PushSpec {
                    step: push_step,
                    force: [0.0, f, 0.0],
                    duration: push_duration,
                });
            }
            cfg.eval.seed = cfg.seeds.eval;
            let policy = policy.unwrap_or_else(|| cfg.paths.checkpoints.join(SHADOW_CHECKPOINT));
            cmd_eval(&cfg, &policy, dump.as_deref(), out)
        }
        Command::Deploy {
            shadow,
            hit,
            targets,
            steps,
            out: path,
        } => {
            cfg.paths.targets = targets.or(cfg.paths.targets);
            if let Some(n) = steps {
                cfg.deploy.steps = n;
            }
            let shadow = shadow.unwrap_or_else(|| cfg.paths.checkpoints.join(SHADOW_CHECKPOINT));
            let hit = hit.unwrap_or_else(|| cfg.paths.checkpoints.join(HIT_CHECKPOINT));
            cmd_deploy(&cfg, &shadow, &hit, path.as_deref(), out)
        }
    }
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// JSON object of `value` with the provenance fields added.
fn record(value: &impl Serialize, cfg: &PipelineConfig, seed: u64) -> Value {
    let mut v = serde_json::to_value(value).expect("records serialize");
    if let Value::Object(m) = &mut v {
        m.insert("config_hash".into(), json!(cfg.config_hash()));
        m.insert("seed".into(), json!(seed));
    }
    v
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn append_lines(path: &Path, lines: &[Value]) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes next to `path` and renames, so an interrupted save keeps the old file.
fn save_checkpoint_atomic(ck: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    let tmp = path.with_extension("hpck.tmp");
    save_checkpoint(ck, &tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn load_model(cfg: &PipelineConfig) -> Result<HumanoidModel> {
    match &cfg.paths.model {
        Some(p) => HumanoidModel::load(p),
        None => Ok(HumanoidModel::default_model()),
    }
}

fn load_map(cfg: &PipelineConfig, model: &HumanoidModel) -> Result<RetargetMap> {
    match &cfg.paths.retarget_map {
        Some(p) => RetargetMap::load(p, model),
        None => RetargetMap::default_map(model),
    }
}

fn target_stream(cfg: &PipelineConfig, model: &HumanoidModel) -> Result<TargetStream> {
    match &cfg.paths.targets {
        Some(p) => load_target_stream(p),
        None => Ok(TargetStream::standing(
            "standing",
            &vec![0.0; model.num_joints()],
            cfg.train.standing_frames,
        )),
    }
}

/// Entries of the 50 Hz retargeted sequence that fall outside joint limits.
pub fn count_clamped(seq: &MotionSequence, map: &RetargetMap, model: &HumanoidModel) -> Result<(usize, usize)> {
    let seq = seq.resample(POLICY_RATE)?;
    let mut clamped = 0;
    let mut total = 0;
    for f in seq.frames() {
        let raw = retarget_frame_unclamped(f, map, model)?;
        clamped += raw.iter().zip(&model.joints).filter(|(v, j)| **v < j.lower || **v > j.upper).count();
        total += raw.len();
    }
    Ok((clamped, total))
}

#[derive(Serialize)]
struct RetargetSummary {
    name: String,
    frames: usize,
    clamped: usize,
    clamp_rate: f64,
    joint_speed_p50: f64,
    joint_speed_p90: f64,
    joint_speed_p99: f64,
}

fn cmd_retarget(cfg: &PipelineConfig, motion: &Path, out_path: &Path, out: &mut dyn Write) -> CmdResult {
    let model = load_model(cfg)?;
    let map = load_map(cfg, &model).map_err(mismatch)?;
    let seq = load_motion(motion)?;
    let mut stream = build_target_stream(&seq, &map, &model).map_err(mismatch)?;
    stream.config_hash = Some(cfg.config_hash());
    stream.seed = Some(cfg.seeds.train);
    save_target_stream(&stream, out_path)?;
    let (clamped, total) = count_clamped(&seq, &map, &model)?;
    let mut speeds: Vec<f64> = stream
        .frames
        .windows(2)
        .flat_map(|w| {
            let (a, b) = (w[0].joint_targets(), w[1].joint_targets());
            a.into_iter().zip(b).map(|(x, y)| (y - x).abs() * POLICY_RATE).collect::<Vec<_>>()
        })
        .collect();
    speeds.sort_by(f64::total_cmp);
    let summary = RetargetSummary {
        name: stream.name.clone(),
        frames: stream.len(),
        clamped,
        clamp_rate: clamped as f64 / total.max(1) as f64,
        joint_speed_p50: percentile(&speeds, 50.0),
        joint_speed_p90: percentile(&speeds, 90.0),
        joint_speed_p99: percentile(&speeds, 99.0),
    };
    emit(out, &record(&summary, cfg, cfg.seeds.train))?;
    Ok(())
}

fn cmd_filter(cfg: &PipelineConfig, out_dir: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    if cfg.paths.motions.is_empty() {
        return Err(Error::Empty("no motion files given".into()).into());
    }
    cfg.filter.validate()?;
    let model = load_model(cfg)?;
    let map = load_map(cfg, &model).map_err(mismatch)?;
    if let Some(d) = out_dir {
        create_dir(d)?;
    }
    let mut accepted = 0;
    for path in &cfg.paths.motions {
        let seq = load_motion(path)?;
        let report = filter_sequence(&seq, &cfg.filter, &map, &model).map_err(mismatch)?;
        if report.accepted {
            accepted += 1;
            if let Some(d) = out_dir {
                let mut stream = build_target_stream(&seq, &map, &model)?;
                stream.config_hash = Some(cfg.config_hash());
                stream.seed = Some(cfg.seeds.train);
                save_target_stream(&stream, d.join(format!("{}.json", seq.name)))?;
            }
        }
        let row = json!({"path": path, "name": seq.name, "accepted": report.accepted, "reasons": report.reasons});
        emit(out, &record(&row, cfg, cfg.seeds.train))?;
    }
    let total = cfg.paths.motions.len();
    emit(out, &record(&json!({"total": total, "accepted": accepted}), cfg, cfg.seeds.train))?;
    Ok(())
}

fn shadow_meta(cfg: &PipelineConfig, policy_cfg: &ShadowPolicyConfig, iteration: u64) -> CheckpointMeta {
    CheckpointMeta {
        model: "shadow".into(),
        config: serde_json::to_value(policy_cfg).expect("config serializes"),
        seed: cfg.seeds.train,
        config_hash: Some(cfg.config_hash()),
        iteration,
        optimizer_step: 0,
    }
}

/// Loads a shadowing policy and, if present, its optimizer state.
pub fn load_shadow(path: &Path) -> Result<(ShadowPolicy, Checkpoint)> {
    let ck = load_checkpoint(path)?;
    if ck.meta.model != "shadow" {
        return Err(Error::Config(format!("{} holds a `{}` model, not a shadowing policy", path.display(), ck.meta.model)));
    }
    let pcfg: ShadowPolicyConfig = serde_json::from_value(ck.meta.config.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let mut policy = ShadowPolicy::new(pcfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    ck.restore_params(&mut policy.store)?;
    Ok((policy, ck))
}

pub fn load_hit(path: &Path) -> Result<HitPolicy> {
    let ck = load_checkpoint(path)?;
    if ck.meta.model != "hit" {
        return Err(Error::Config(format!("{} holds a `{}` model, not an imitation policy", path.display(), ck.meta.model)));
    }
    let hcfg: HitConfig = serde_json::from_value(ck.meta.config.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let mut policy = HitPolicy::new(hcfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    ck.restore_params(&mut policy.store)?;
    Ok(policy)
}

fn cmd_train_shadow(cfg: &PipelineConfig, resume: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let dataset = if cfg.paths.motions.is_empty() {
        MotionDataset::new(vec![target_stream(cfg, &model)?])
    } else {
        let map = load_map(cfg, &model).map_err(mismatch)?;
        let seqs = cfg.paths.motions.iter().map(load_motion).collect::<Result<Vec<_>>>()?;
        MotionDataset::build(&seqs, &cfg.filter, &map, &model)?.0
    };
    if dataset.is_empty() {
        return Err(Error::Empty("no motion passed the filter".into()).into());
    }
    let seed = cfg.seeds.train;
    let (policy, state) = match resume {
        Some(p) => {
            let (policy, ck) = load_shadow(p)?;
            (policy, Some(ck))
        }
        None => (ShadowPolicy::new(cfg.shadow.clone(), &mut ChaCha8Rng::seed_from_u64(seed))?, None),
    };
    let policy_cfg = policy.cfg.clone();
    let mut trainer = PpoTrainer::new(policy, cfg.ppo.clone(), cfg.train.workers, seed, |_, _| {
        ShadowTask::new(
            HumanoidEnv::new(model.clone(), cfg.sim.clone())?,
            dataset.clone(),
            cfg.ranges.clone(),
            cfg.train.segment,
        )
    })?;
    if let Some(ck) = &state {
        let mut adam = Adam::new(cfg.ppo.adam.clone(), &trainer.policy.store);
        ck.restore_adam(&mut adam, &trainer.policy.store)?;
        trainer.adam = adam;
        trainer.iteration = ck.meta.iteration;
    }
    let ck_path = cfg.paths.checkpoints.join(SHADOW_CHECKPOINT);
    let log_path = cfg.paths.logs.join("train_shadow.jsonl");
    if resume.is_none() && log_path.exists() {
        fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
    }
    let every = cfg.train.checkpoint_every.max(1);
    while trainer.iteration < cfg.train.iterations {
        let log = trainer.iterate()?;
        let row = record(&log, cfg, seed);
        emit(out, &row)?;
        append_lines(&log_path, &[row])?;
        if trainer.iteration % every == 0 || trainer.iteration == cfg.train.iterations {
            let ck = Checkpoint::from_store(
                shadow_meta(cfg, &policy_cfg, trainer.iteration),
                &trainer.policy.store,
                Some(&trainer.adam),
                DType::F64,
            );
            save_checkpoint_atomic(&ck, &ck_path)?;
        }
    }
    Ok(())
}

fn load_demos(cfg: &PipelineConfig) -> Result<(Vec<Demonstration>, Vec<Demonstration>)> {
    if !cfg.paths.demos.is_empty() {
        let demos = cfg.paths.demos.iter().map(load_demonstration).collect::<Result<Vec<_>>>()?;
        return Ok((demos, Vec::new()));
    }
    let data = &cfg.imitation_data;
    let task = SyntheticTask::new(data.task.clone())?;
    let seed = cfg.seeds.train;
    let train = task.demonstrations(data.train_demos, seed, true)?;
    let validation = task.demonstrations(data.validation_demos, seed ^ 0x5eed_0000_0000, false)?;
    Ok((train, validation))
}

fn cmd_train_imitate(cfg: &PipelineConfig, out: &mut dyn Write) -> CmdResult {
    cfg.validate()?;
    let (train, validation) = load_demos(cfg)?;
    let first = train.first().ok_or_else(|| Error::Empty("no demonstrations".into()))?;
    let hcfg = HitConfig {
        feat_dim: first.feat_dim,
        proprio_dim: first.proprio_dim,
        action_dim: first.action_dim,
        ..cfg.hit.clone()
    };
    for d in train.iter().chain(&validation) {
        if (d.feat_dim, d.proprio_dim, d.action_dim) != (hcfg.feat_dim, hcfg.proprio_dim, hcfg.action_dim) {
            return Err(mismatch(Error::Config(format!("demonstration `{}` has different dimensions", d.metadata.name))));
        }
    }
    let seed = cfg.seeds.train;
    let mut policy = HitPolicy::new(hcfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    let logs = train_imitation(&mut policy, &train, &validation, &cfg.imitation, seed)?;
    let rows: Vec<Value> = logs.iter().map(|l| record(l, cfg, seed)).collect();
    for r in &rows {
        emit(out, r)?;
    }
    let log_path = cfg.paths.logs.join("train_imitate.jsonl");
    if log_path.exists() {
        fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
    }
    append_lines(&log_path, &rows)?;
    let meta = CheckpointMeta {
        model: "hit".into(),
        config: serde_json::to_value(&hcfg).expect("config serializes"),
        seed,
        config_hash: Some(cfg.config_hash()),
        iteration: cfg.imitation.epochs as u64,
        optimizer_step: 0,
    };
    save_checkpoint_atomic(
        &Checkpoint::from_store(meta, &policy.store, None, DType::F64),
        &cfg.paths.checkpoints.join(HIT_CHECKPOINT),
    )?;
    let final_errors = imitation_errors(&policy, &train)?;
    emit(out, &record(&json!({"final_train": final_errors}), cfg, seed))?;
    Ok(())
}

fn cmd_eval(cfg: &PipelineConfig, policy_path: &Path, dump: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    cfg.validate()?;
    if cfg.eval.episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()).into());
    }
    let model = load_model(cfg)?;
    let (policy, _) = load_shadow(policy_path)?;
    let stream = target_stream(cfg, &model)?;
    let (report, logs) = evaluate(&policy, &model, &cfg.sim, &stream, &cfg.eval).map_err(mismatch)?;
    if let Some(p) = dump {
        if p.exists() {
            fs::remove_file(p).map_err(|e| Error::io(p, e))?;
        }
        for (i, log) in logs.iter().enumerate() {
            let rows: Vec<Value> = log
                .iter()
                .map(|r| {
                    let mut v = serde_json::to_value(r).expect("records serialize");
                    v["episode"] = json!(i);
                    v
                })
                .collect();
            append_lines(p, &rows)?;
        }
    }
    emit(out, &record(&report, cfg, cfg.eval.seed))?;
    Ok(())
}

fn cmd_deploy(cfg: &PipelineConfig, shadow: &Path, hit: &Path, out_path: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let (shadow, _) = load_shadow(shadow)?;
    let hit = load_hit(hit)?;
    let oracle = FeatureOracle::new(cfg.features.clone())?;
    if hit.cfg.proprio_dim != PROPRIO_DIM || hit.cfg.feat_dim != cfg.features.feat_dim || cfg.features.input_dim > PROPRIO_DIM {
        return Err(mismatch(Error::Config(format!(
            "imitation policy expects {} proprioception and {} features per camera; deployment supplies {PROPRIO_DIM} and {}",
            hit.cfg.proprio_dim, hit.cfg.feat_dim, cfg.features.feat_dim
        ))));
    }
    let stream = target_stream(cfg, &model)?;
    let mut env = HumanoidEnv::new(model, cfg.sim.clone())?;
    let input_dim = cfg.features.input_dim;
    let mut features = |_: usize, proprio: &[f64]| oracle.features(&proprio[..input_dim]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.eval);
    let trace = deploy_loop(&shadow, &hit, &mut env, stream, cfg.eval.params.clone(), &mut features, &cfg.deploy, &mut rng)
        .map_err(mismatch)?;
    if let Some(p) = out_path {
        let text = serde_json::to_string(&record(&trace, cfg, cfg.seeds.eval)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    let summary = json!({
        "steps": trace.steps.len(),
        "queries": trace.queries,
        "steps_per_query": trace.steps_per_query(),
        "termination": trace.termination,
    });
    emit(out, &record(&summary, cfg, cfg.seeds.eval))?;
    Ok(())
}
