//! Soft actor-critic with a tanh-squashed Gaussian policy, twin critics and
//! Polyak-averaged target critics.

use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::{Batch, ReplayBuffer, Transition};
use super::mlp::{Adam, ForwardCache, Gradients, Mlp};
use crate::error::{precondition, Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub gamma: f64,
    /// Entropy weight.
    pub alpha: f64,
    /// Target update rate.
    pub polyak: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps taken with uniform random actions before learning.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub episodes: usize,
    /// Deterministic evaluation every this many episodes.
    pub eval_interval: usize,
    pub hidden: Vec<usize>,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.1,
            polyak: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            warmup_steps: 1000,
            updates_per_step: 1,
            episodes: 1000,
            eval_interval: 10,
            hidden: vec![256, 256],
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(precondition("discount must lie in (0, 1)"));
        }
        if !(self.alpha >= 0.0) {
            return Err(precondition("entropy weight must be non-negative"));
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return Err(precondition("polyak rate must lie in (0, 1]"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(precondition("learning rates must be positive"));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.eval_interval == 0 {
            return Err(precondition("batch size, buffer capacity and eval interval must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(precondition("hidden layer sizes must be positive"));
        }
        Ok(())
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Policy output for a batch under fixed reparameterization noise.
#[derive(Clone, Debug)]
pub struct PolicyBatch {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub mean: Array2<f64>,
    pub log_std: Array2<f64>,
    /// True where the raw log-std lies inside the clamp interval.
    active: Array2<bool>,
    noise: Array2<f64>,
    cache: ForwardCache,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub policy_loss: f64,
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub config: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: usize,
}

/// Mean squared error of a critic against fixed targets, with gradients.
pub fn critic_loss_and_grads(critic: &Mlp, inputs: &Array2<f64>, targets: &Array1<f64>) -> (f64, Gradients) {
    let cache = critic.forward_cached(inputs);
    let q = cache.output.column(0).to_owned();
    let diff = &q - targets;
    let n = targets.len() as f64;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let grad_out = (diff * (2.0 / n)).insert_axis(Axis(1));
    (loss, critic.backward(&cache, &grad_out).0)
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, config: SacConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || act_dim == 0 {
            return Err(precondition("observation and action dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&config.hidden);
            s.push(output);
            s
        };
        let policy = Mlp::new(&sizes(obs_dim, 2 * act_dim), &mut rng)?;
        let q1 = Mlp::new(&sizes(obs_dim + act_dim, 1), &mut rng)?;
        let q2 = Mlp::new(&sizes(obs_dim + act_dim, 1), &mut rng)?;
        Ok(Self {
            policy_opt: Adam::new(&policy, config.actor_lr),
            q1_opt: Adam::new(&q1, config.critic_lr),
            q2_opt: Adam::new(&q2, config.critic_lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            policy,
            q1,
            q2,
            config,
            obs_dim,
            act_dim,
            rng,
            updates: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Number of completed gradient updates.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// Uniform action in [-1, 1) for warmup exploration.
    pub fn random_action(&mut self) -> Vec<f64> {
        (0..self.act_dim).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }

    fn noise(&mut self, rows: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, self.act_dim), || self.rng.sample(StandardNormal))
    }

    /// Squashed-Gaussian actions and log-densities for the given noise.
    pub fn policy_eval(&self, states: &Array2<f64>, noise: &Array2<f64>) -> PolicyBatch {
        let a = self.act_dim;
        let cache = self.policy.forward_cached(states);
        let mean = cache.output.slice(s![.., ..a]).to_owned();
        let raw = cache.output.slice(s![.., a..]);
        let active = raw.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let pre = &mean + &(log_std.mapv(f64::exp) * noise);
        let actions = pre.mapv(f64::tanh);
        let mut log_probs = Array1::zeros(states.nrows());
        for b in 0..states.nrows() {
            log_probs[b] = (0..a)
                .map(|i| {
                    let xi = noise[[b, i]];
                    -0.5 * xi * xi - log_std[[b, i]] - HALF_LN_2PI - log_one_minus_tanh_sq(pre[[b, i]])
                })
                .sum();
        }
        PolicyBatch { actions, log_probs, mean, log_std, active, noise: noise.clone(), cache }
    }

    /// Log-density of a squashed action under the current policy.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> f64 {
        let out = self.policy.forward(&row(state));
        let a = self.act_dim;
        (0..a)
            .map(|i| {
                let ls = out[[0, a + i]].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let u = action[i].atanh();
                let xi = (u - out[[0, i]]) / ls.exp();
                -0.5 * xi * xi - ls - HALF_LN_2PI - log_one_minus_tanh_sq(u)
            })
            .sum()
    }

    /// Stochastic mode returns `tanh(mu + sigma * xi)` with its log-density;
    /// deterministic mode returns `tanh(mu)` alone.
    pub fn policy_sample(&mut self, state: &[f64], deterministic: bool) -> (Vec<f64>, Option<f64>) {
        let x = row(state);
        if deterministic {
            let out = self.policy.forward(&x);
            return ((0..self.act_dim).map(|i| out[[0, i]].tanh()).collect(), None);
        }
        let noise = self.noise(1);
        let pb = self.policy_eval(&x, &noise);
        (pb.actions.row(0).to_vec(), Some(pb.log_probs[0]))
    }

    /// Bootstrapped critic targets using the given next-action noise.
    pub fn critic_target_with_noise(&self, batch: &Batch, noise: &Array2<f64>) -> Array1<f64> {
        let next = self.policy_eval(&batch.next_states, noise);
        let sa = concatenate![Axis(1), batch.next_states, next.actions];
        let q1 = self.q1_target.forward(&sa);
        let q2 = self.q2_target.forward(&sa);
        let (gamma, alpha) = (self.config.gamma, self.config.alpha);
        Array1::from_shape_fn(batch.len(), |b| {
            if batch.dones[b] != 0.0 || gamma == 0.0 {
                return batch.rewards[b];
            }
            let soft = q1[[b, 0]].min(q2[[b, 0]]) - alpha * next.log_probs[b];
            batch.rewards[b] + gamma * soft
        })
    }

    pub fn critic_target(&mut self, batch: &Batch) -> Array1<f64> {
        let noise = self.noise(batch.len());
        self.critic_target_with_noise(batch, &noise)
    }

    /// One Adam step of both critics towards fixed targets.
    pub fn critic_step(&mut self, batch: &Batch, targets: &Array1<f64>) -> Result<(f64, f64)> {
        let sa = concatenate![Axis(1), batch.states, batch.actions];
        let (l1, g1) = critic_loss_and_grads(&self.q1, &sa, targets);
        let (l2, g2) = critic_loss_and_grads(&self.q2, &sa, targets);
        if !l1.is_finite() || !l2.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.updates });
        }
        self.q1_opt.step(&mut self.q1, &g1);
        self.q2_opt.step(&mut self.q2, &g2);
        Ok((l1, l2))
    }

    pub fn critic_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let y = self.critic_target(batch);
        self.critic_step(batch, &y)
    }

    /// `mean(alpha * log pi(a|s) - min_j Q_j(s, a))` with `a` reparameterized
    /// through the policy, and its gradient with respect to the policy
    /// parameters. Critics are held fixed.
    pub fn policy_loss_and_grads(&self, states: &Array2<f64>, noise: &Array2<f64>) -> (f64, Gradients) {
        let (n, a) = (states.nrows(), self.act_dim);
        let alpha = self.config.alpha;
        let pb = self.policy_eval(states, noise);
        let sa = concatenate![Axis(1), *states, pb.actions];
        let c1 = self.q1.forward_cached(&sa);
        let c2 = self.q2.forward_cached(&sa);
        let first = Array1::from_shape_fn(n, |b| c1.output[[b, 0]] <= c2.output[[b, 0]]);
        let qmin = Array1::from_shape_fn(n, |b| c1.output[[b, 0]].min(c2.output[[b, 0]]));
        let loss = (alpha * &pb.log_probs - &qmin).sum() / n as f64;

        let pick = |use_first: bool| Array2::from_shape_fn((n, 1), |(b, _)| if first[b] == use_first { 1.0 } else { 0.0 });
        let (_, d1) = self.q1.backward(&c1, &pick(true));
        let (_, d2) = self.q2.backward(&c2, &pick(false));
        let dq_da = (d1 + d2).slice(s![.., self.obs_dim..]).to_owned();

        let inv_n = 1.0 / n as f64;
        let mut grad_out = Array2::zeros((n, 2 * a));
        for b in 0..n {
            for i in 0..a {
                let act = pb.actions[[b, i]];
                let du = inv_n * (2.0 * alpha * act - dq_da[[b, i]] * (1.0 - act * act));
                grad_out[[b, i]] = du;
                if pb.active[[b, i]] {
                    let sigma = pb.log_std[[b, i]].exp();
                    grad_out[[b, a + i]] = du * sigma * pb.noise[[b, i]] - alpha * inv_n;
                }
            }
        }
        let (grads, _) = self.policy.backward(&pb.cache, &grad_out);
        (loss, grads)
    }

    pub fn policy_update(&mut self, batch: &Batch) -> Result<f64> {
        let noise = self.noise(batch.len());
        let (loss, grads) = self.policy_loss_and_grads(&batch.states, &noise);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.updates });
        }
        self.policy_opt.step(&mut self.policy, &grads);
        Ok(loss)
    }

    pub fn polyak_update(&mut self) {
        let rho = self.config.polyak;
        self.q1_target.blend_from(&self.q1, rho);
        self.q2_target.blend_from(&self.q2, rho);
    }

    /// Critic step, policy step and target update on one replay batch.
    pub fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let (critic1_loss, critic2_loss) = self.critic_update(&batch)?;
        let policy_loss = self.policy_update(&batch)?;
        self.polyak_update();
        self.updates += 1;
        Ok(UpdateStats { critic1_loss, critic2_loss, policy_loss })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            policy: self.policy.clone(),
            q1: self.q1.clone(),
            q2: self.q2.clone(),
            q1_target: self.q1_target.clone(),
            q2_target: self.q2_target.clone(),
            policy_opt: self.policy_opt.clone(),
            q1_opt: self.q1_opt.clone(),
            q2_opt: self.q2_opt.clone(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
            updates: self.updates,
        }
    }

    /// Restores weights, optimizer moments and RNG state; the replay buffer
    /// starts empty.
    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.version != CHECKPOINT_VERSION {
            return Err(precondition(format!("unsupported checkpoint version {}", c.version)));
        }
        c.config.validate()?;
        let word_pos: u128 = c.rng_word_pos.parse().map_err(|_| precondition("bad RNG position"))?;
        let mut rng = ChaCha8Rng::from_seed(c.rng_seed);
        rng.set_stream(c.rng_stream);
        rng.set_word_pos(word_pos);
        let nets_ok = c.policy.input_dim() == c.obs_dim
            && c.policy.output_dim() == 2 * c.act_dim
            && c.q1.same_shape(&c.q1_target)
            && c.q2.same_shape(&c.q2_target)
            && c.q1.input_dim() == c.obs_dim + c.act_dim;
        if !nets_ok {
            return Err(precondition("checkpoint network shapes are inconsistent"));
        }
        Ok(Self {
            buffer: ReplayBuffer::new(c.config.buffer_capacity)?,
            config: c.config,
            obs_dim: c.obs_dim,
            act_dim: c.act_dim,
            policy: c.policy,
            q1: c.q1,
            q2: c.q2,
            q1_target: c.q1_target,
            q2_target: c.q2_target,
            policy_opt: c.policy_opt,
            q1_opt: c.q1_opt,
            q2_opt: c.q2_opt,
            rng,
            updates: c.updates,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(&self.checkpoint())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    rng_seed: [u8; 32],
    rng_stream: u64,
    /// Decimal string; JSON numbers cannot carry a u128 portably.
    rng_word_pos: String,
    pub updates: usize,
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape")
}
