//! Proximal policy optimization for the shadowing transformer.
//!
//! Rollouts run on independent workers, each owning its environments and a
//! generator seeded from (seed, iteration, worker). Every iteration starts
//! fresh episodes, so an iteration is a pure function of the weights, the
//! optimizer state, the seed and the iteration index.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{clip_grad_norm, Adam, AdamConfig};
use super::shadow::{gaussian_entropy, gaussian_log_prob, ShadowPolicy};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::simenv::{Environment, Termination, REWARD_TERMS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub adam: AdamConfig,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Policy steps per environment per iteration.
    pub rollout_steps: usize,
    pub envs_per_worker: usize,
    /// Multiplies rewards before advantage estimation.
    pub reward_scale: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch_size: 256,
            adam: AdamConfig::default(),
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            rollout_steps: 100,
            envs_per_worker: 4,
            reward_scale: 0.1,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in (0, 1]".into()));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config("clip epsilon must be positive".into()));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_steps == 0 || self.envs_per_worker == 0 {
            return Err(Error::Config(
                "epochs, minibatch size, rollout steps and envs per worker must be positive".into(),
            ));
        }
        if !(self.adam.lr > 0.0) || !(self.reward_scale > 0.0) {
            return Err(Error::Config("learning rate and reward scale must be positive".into()));
        }
        Ok(())
    }
}

/// Generalized advantage estimation.
///
/// `values` has one more entry than `rewards`: the value of the state after
/// the last step. `dones[t]` stops bootstrapping from step `t + 1`.
pub fn gae_advantages(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(Error::dim(n + 1, values.len(), "GAE values"));
    }
    if dones.len() != n {
        return Err(Error::dim(n, dones.len(), "GAE dones"));
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero mean, unit variance (left unchanged when the spread vanishes).
pub fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for x in xs.iter_mut() {
        *x -= mean;
        if sd > 1e-8 {
            *x /= sd;
        }
    }
}

/// One training sample; its history is `tokens[start..=end]` of the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub start: usize,
    pub end: usize,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub tokens: Vec<Vec<f64>>,
    pub samples: Vec<Sample>,
    /// Undiscounted, unscaled returns of episodes that ended in this rollout.
    pub episode_returns: Vec<f64>,
    pub episode_lengths: Vec<usize>,
    pub failures: usize,
    /// Mean unweighted reward terms over all steps.
    pub term_means: [f64; 8],
    pub mean_step_reward: f64,
}

impl RolloutBatch {
    pub fn history(&self, s: &Sample) -> &[Vec<f64>] {
        &self.tokens[s.start..=s.end]
    }

    fn append(&mut self, mut other: RolloutBatch) {
        let off = self.tokens.len();
        for s in &mut other.samples {
            s.start += off;
            s.end += off;
        }
        self.tokens.append(&mut other.tokens);
        self.samples.append(&mut other.samples);
        self.episode_returns.append(&mut other.episode_returns);
        self.episode_lengths.append(&mut other.episode_lengths);
        self.failures += other.failures;
    }
}

/// Log density of a diagonal Gaussian, outside the graph.
pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut lp = 0.0;
    for i in 0..action.len() {
        let z = (action[i] - mean[i]) * (-log_std[i]).exp();
        lp += -0.5 * z * z - log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    lp
}

struct Step {
    start: usize,
    end: usize,
    action: Vec<f64>,
    log_prob: f64,
    value: f64,
    reward: f64,
    done: bool,
}

struct Slot {
    tokens: Vec<Vec<f64>>,
    episode_start: usize,
    steps: Vec<Step>,
    episode_return: f64,
    episode_length: usize,
}

impl Slot {
    fn history(&self, ctx: usize) -> (usize, usize) {
        let end = self.tokens.len() - 1;
        (end.saturating_sub(ctx - 1).max(self.episode_start), end)
    }
}

/// Collects `cfg.rollout_steps` steps from every environment of one worker.
pub fn collect_rollout<E: Environment>(
    policy: &ShadowPolicy,
    envs: &mut [E],
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBatch> {
    let ctx = policy.cfg.context_length;
    let mut slots = Vec::with_capacity(envs.len());
    for env in envs.iter_mut() {
        let (p, t) = env.reset_episode(rng)?;
        slots.push(Slot {
            tokens: vec![ShadowPolicy::token(&p, &t)],
            episode_start: 0,
            steps: Vec::new(),
            episode_return: 0.0,
            episode_length: 0,
        });
    }
    let mut out = RolloutBatch::default();
    let mut term_sums = [0.0; 8];
    let mut reward_sum = 0.0;
    let mut count = 0usize;
    for _ in 0..cfg.rollout_steps {
        let ranges: Vec<(usize, usize)> = slots.iter().map(|s| s.history(ctx)).collect();
        let hists: Vec<&[Vec<f64>]> = slots.iter().zip(&ranges).map(|(s, (a, b))| &s.tokens[*a..=*b]).collect();
        let outs = policy.act(&hists)?;
        for (i, env) in envs.iter_mut().enumerate() {
            let o = &outs[i];
            let action: Vec<f64> = o
                .mean
                .iter()
                .zip(&o.log_std)
                .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let lp = log_prob(&action, &o.mean, &o.log_std);
            let res = env.step(&action)?;
            let slot = &mut slots[i];
            for (acc, t) in term_sums.iter_mut().zip(res.reward.terms()) {
                *acc += t;
            }
            reward_sum += res.reward.total;
            count += 1;
            slot.episode_return += res.reward.total;
            slot.episode_length += 1;
            let next = ShadowPolicy::token(&res.proprio, &res.target);
            let mut reward = res.reward.total * cfg.reward_scale;
            let failed = res.fault || res.termination.is_some_and(Termination::is_failure);
            if res.done && !failed {
                // time limit: bootstrap from the state that was cut off
                let (a, e) = ranges[i];
                let mut h = slot.tokens[a..=e].to_vec();
                h.push(next.clone());
                if h.len() > ctx {
                    h.remove(0);
                }
                let v = policy.act(&[&h])?[0].value;
                reward += cfg.gamma * v;
            }
            let (start, end) = ranges[i];
            slot.steps.push(Step {
                start,
                end,
                action,
                log_prob: lp,
                value: o.value,
                reward,
                done: res.done,
            });
            if res.done {
                out.episode_returns.push(slot.episode_return);
                out.episode_lengths.push(slot.episode_length);
                if failed {
                    out.failures += 1;
                }
                slot.episode_return = 0.0;
                slot.episode_length = 0;
                let (p, t) = env.reset_episode(rng)?;
                slot.tokens.push(ShadowPolicy::token(&p, &t));
                slot.episode_start = slot.tokens.len() - 1;
            } else {
                slot.tokens.push(next);
            }
        }
    }
    // bootstrap values for the unfinished episodes
    let ranges: Vec<(usize, usize)> = slots.iter().map(|s| s.history(ctx)).collect();
    let hists: Vec<&[Vec<f64>]> = slots.iter().zip(&ranges).map(|(s, (a, b))| &s.tokens[*a..=*b]).collect();
    let tails = policy.act(&hists)?;
    for (slot, tail) in slots.into_iter().zip(tails) {
        let rewards: Vec<f64> = slot.steps.iter().map(|s| s.reward).collect();
        let mut values: Vec<f64> = slot.steps.iter().map(|s| s.value).collect();
        values.push(tail.value);
        let dones: Vec<bool> = slot.steps.iter().map(|s| s.done).collect();
        let (adv, ret) = gae_advantages(&rewards, &values, &dones, cfg.gamma, cfg.lambda)?;
        let mut part = RolloutBatch {
            tokens: slot.tokens,
            ..RolloutBatch::default()
        };
        for ((s, a), r) in slot.steps.into_iter().zip(adv).zip(ret) {
            part.samples.push(Sample {
                start: s.start,
                end: s.end,
                action: s.action,
                log_prob: s.log_prob,
                value: s.value,
                advantage: a,
                ret: r,
            });
        }
        out.append(part);
    }
    let n = count.max(1) as f64;
    out.term_means = term_sums.map(|s| s / n);
    out.mean_step_reward = reward_sum / n;
    Ok(out)
}

/// Per-sample clipped surrogate min(ρA, clip(ρ, 1 ± ε)A), batch×1.
pub fn clipped_surrogate(g: &mut Graph, log_prob: Var, old_log_prob: Var, advantages: Var, eps: f64) -> Var {
    let d = g.sub(log_prob, old_log_prob);
    let ratio = g.exp(d);
    let s1 = g.mul(ratio, advantages);
    let clipped = g.clamp(ratio, 1.0 - eps, 1.0 + eps);
    let s2 = g.mul(clipped, advantages);
    g.minimum(s1, s2)
}

#[derive(Clone, Copy, Debug)]
pub struct PpoLoss {
    pub total: Var,
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
    pub log_prob: Var,
}

/// Builds the PPO loss over `samples` of `batch`.
pub fn ppo_loss(g: &mut Graph, policy: &ShadowPolicy, batch: &RolloutBatch, samples: &[&Sample], cfg: &PpoConfig, advantages: &[f64]) -> Result<PpoLoss> {
    let hists: Vec<&[Vec<f64>]> = samples.iter().map(|s| batch.history(s)).collect();
    let seq = hists.iter().map(|h| h.len()).max().unwrap_or(1);
    let sb = policy.batch(&hists, seq)?;
    let vars = policy.forward(g, &sb);
    let n = samples.len();
    let a_dim = policy.cfg.action_dim;
    let actions = Tensor::from_rows(&samples.iter().map(|s| s.action.clone()).collect::<Vec<_>>())?;
    if actions.cols != a_dim {
        return Err(Error::dim(a_dim, actions.cols, "stored action"));
    }
    let actions = g.input(actions);
    let old = g.input(Tensor::from_vec(n, 1, samples.iter().map(|s| s.log_prob).collect())?);
    let adv = g.input(Tensor::from_vec(n, 1, advantages.to_vec())?);
    let ret = g.input(Tensor::from_vec(n, 1, samples.iter().map(|s| s.ret).collect())?);
    let lp = gaussian_log_prob(g, actions, vars.mean, vars.log_std);
    let surr = clipped_surrogate(g, lp, old, adv, cfg.clip);
    let pl = g.mean(surr);
    let pl = g.neg(pl);
    let vl = g.mse(vars.value, ret);
    let vl = g.scale(vl, 0.5);
    let ent = gaussian_entropy(g, vars.log_std);
    let wv = g.scale(vl, cfg.value_coef);
    let we = g.scale(ent, -cfg.entropy_coef);
    let t = g.add(pl, wv);
    let total = g.add(t, we);
    Ok(PpoLoss {
        total,
        policy: pl,
        value: vl,
        entropy: ent,
        log_prob: lp,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Several epochs of clipped-surrogate minibatch updates over `batch`.
pub fn ppo_update(
    policy: &mut ShadowPolicy,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoMetrics> {
    if batch.samples.is_empty() {
        return Err(Error::Empty("PPO batch has no samples".into()));
    }
    let mut adv: Vec<f64> = batch.samples.iter().map(|s| s.advantage).collect();
    if cfg.normalize_advantages {
        normalize(&mut adv);
    }
    let mut order: Vec<usize> = (0..batch.samples.len()).collect();
    let mut m = PpoMetrics::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &batch.samples[i]).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let mut grads = {
                let mut g = Graph::with_params(&policy.store);
                let loss = ppo_loss(&mut g, policy, batch, &samples, cfg, &a)?;
                let total = g.value(loss.total).item();
                if !total.is_finite() {
                    return Err(Error::NonFinite(format!("PPO loss {total}")));
                }
                m.policy_loss += g.value(loss.policy).item();
                m.value_loss += g.value(loss.value).item();
                m.entropy += g.value(loss.entropy).item();
                let lp = g.value(loss.log_prob);
                for (k, s) in samples.iter().enumerate() {
                    let r = lp.data[k] - s.log_prob;
                    // k3 estimator of KL(old || new)
                    m.approx_kl += (r.exp() - 1.0) - r;
                    if (r.exp() - 1.0).abs() > cfg.clip {
                        m.clip_fraction += 1.0;
                    }
                }
                g.backward(loss.total).params(&policy.store)
            };
            m.grad_norm += clip_grad_norm(&mut grads, cfg.max_grad_norm);
            adam.update(&mut policy.store, &grads);
            m.minibatches += 1;
        }
    }
    let k = m.minibatches as f64;
    let samples = (batch.samples.len() * cfg.epochs) as f64;
    m.policy_loss /= k;
    m.value_loss /= k;
    m.entropy /= k;
    m.grad_norm /= k;
    m.approx_kl /= samples;
    m.clip_fraction /= samples;
    if !policy.store.is_finite() {
        return Err(Error::NonFinite("policy weights after update".into()));
    }
    Ok(m)
}

/// One row of the training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    /// Mean return of episodes finished in this iteration.
    pub mean_return: Option<f64>,
    pub episodes: usize,
    pub failures: usize,
    pub mean_episode_length: Option<f64>,
    pub mean_step_reward: f64,
    pub reward_terms: Vec<(String, f64)>,
    pub metrics: PpoMetrics,
}

/// Generator for worker `w` in iteration `it`.
pub fn worker_rng(seed: u64, iteration: u64, worker: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(iteration.wrapping_mul(1 << 16).wrapping_add(worker as u64 + 1));
    r
}

/// Learner plus its rollout workers.
pub struct PpoTrainer<E> {
    pub policy: ShadowPolicy,
    pub adam: Adam,
    pub cfg: PpoConfig,
    pub seed: u64,
    pub iteration: u64,
    workers: Vec<Vec<E>>,
}

impl<E: Environment + Send> PpoTrainer<E> {
    /// `make_env(worker, index)` builds each worker's environments.
    pub fn new(
        policy: ShadowPolicy,
        cfg: PpoConfig,
        workers: usize,
        seed: u64,
        mut make_env: impl FnMut(usize, usize) -> Result<E>,
    ) -> Result<Self> {
        cfg.validate()?;
        if workers == 0 {
            return Err(Error::Config("at least one worker is needed".into()));
        }
        let mut pools = Vec::with_capacity(workers);
        for w in 0..workers {
            let pool = (0..cfg.envs_per_worker).map(|i| make_env(w, i)).collect::<Result<Vec<_>>>()?;
            if let Some(e) = pool.first() {
                let d = e.dims();
                let p = &policy.cfg;
                if d.proprio != p.proprio_dim || d.target != p.target_dim || d.action != p.action_dim {
                    return Err(Error::Config(format!(
                        "environment dims {d:?} do not match the policy ({}, {}, {})",
                        p.proprio_dim, p.target_dim, p.action_dim
                    )));
                }
            }
            pools.push(pool);
        }
        Ok(PpoTrainer {
            adam: Adam::new(cfg.adam.clone(), &policy.store),
            policy,
            cfg,
            seed,
            iteration: 0,
            workers: pools,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers.len()
    }

    /// Rollouts from every worker, merged in worker order.
    pub fn collect(&mut self) -> Result<RolloutBatch> {
        let policy = &self.policy;
        let cfg = &self.cfg;
        let (seed, it) = (self.seed, self.iteration);
        let parts: Vec<Result<RolloutBatch>> = if self.workers.len() == 1 {
            vec![collect_rollout(policy, &mut self.workers[0], cfg, &mut worker_rng(seed, it, 0))]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .enumerate()
                    .map(|(w, envs)| s.spawn(move || collect_rollout(policy, envs, cfg, &mut worker_rng(seed, it, w))))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
            })
        };
        let mut batch = RolloutBatch::default();
        let mut terms = [0.0; 8];
        let mut reward = 0.0;
        let k = parts.len() as f64;
        for p in parts {
            let p = p?;
            for (a, b) in terms.iter_mut().zip(p.term_means) {
                *a += b / k;
            }
            reward += p.mean_step_reward / k;
            batch.append(p);
        }
        batch.term_means = terms;
        batch.mean_step_reward = reward;
        Ok(batch)
    }

    /// Collects, updates and advances the iteration counter.
    pub fn iterate(&mut self) -> Result<IterationLog> {
        let batch = self.collect()?;
        let mut rng = worker_rng(self.seed, self.iteration, 0);
        rng.set_word_pos(1 << 40);
        let metrics = ppo_update(&mut self.policy, &mut self.adam, &batch, &self.cfg, &mut rng)?;
        let episodes = batch.episode_returns.len();
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let lengths: Vec<f64> = batch.episode_lengths.iter().map(|&l| l as f64).collect();
        let log = IterationLog {
            iteration: self.iteration,
            mean_return: mean(&batch.episode_returns),
            episodes,
            failures: batch.failures,
            mean_episode_length: mean(&lengths),
            mean_step_reward: batch.mean_step_reward,
            reward_terms: REWARD_TERMS.iter().map(|s| s.to_string()).zip(batch.term_means).collect(),
            metrics,
        };
        self.iteration += 1;
        Ok(log)
    }
}
