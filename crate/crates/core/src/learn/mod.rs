//! Differentiable core, transformer policies and their training loops.

pub mod checkpoint;
pub mod deploy;
pub mod eval;
pub mod features;
pub mod graph;
pub mod hit;
pub mod imitation;
pub mod nn;
pub mod params;
pub mod ppo;
pub mod shadow;
pub mod tensor;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta, DType, NamedTensor, CHECKPOINT_MAGIC,
};
pub use deploy::{deploy_loop, DeployConfig, DeployStep, DeployTrace};
pub use eval::{evaluate, run_episode, EpisodeReport, EvalConfig, EvalReport, PushSpec, RecoveryRule};
pub use features::{FeatureOracle, FeatureOracleConfig};
pub use graph::{grad_check, grad_check_params, AttentionMask, Gradients, Graph, Var};
pub use hit::{hit_loss, HitConfig, HitInputs, HitOutput, HitPolicy, HitVars};
pub use imitation::{
    imitation_errors, make_batch, sample_index, train_imitation, ImitationBatch, ImitationConfig, ImitationErrors, ImitationLog,
    SyntheticTask, SyntheticTaskConfig,
};
pub use nn::{sinusoidal_embeddings, Block, LayerNorm, Linear, TransformerConfig, Trunk};
pub use params::{clip_grad_norm, Adam, AdamConfig, ParamStore};
pub use ppo::{
    clipped_surrogate, collect_rollout, gae_advantages, ppo_loss, ppo_update, worker_rng, IterationLog, PpoConfig, PpoMetrics,
    PpoTrainer, RolloutBatch, Sample,
};
pub use shadow::{gaussian_entropy, gaussian_log_prob, ShadowBatch, ShadowOutput, ShadowPolicy, ShadowPolicyConfig, ShadowVars, TokenHistory};
pub use tensor::Tensor;
