use std::fmt::Write as _;

use super::buffer::Transition;
use super::env::{Environment, GateEnv};
use super::sac::{SacAgent, SacConfig};
use crate::circuit::CircuitParams;
use crate::control::{PulseSchedule, ScheduleShape};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted return of the training episode.
    pub reward: f64,
    /// Metric of the deterministic evaluation run after this episode, if any.
    pub eval_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Rollout {
    pub actions: Vec<Vec<f64>>,
    pub total_reward: f64,
    pub metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Highest-return episode seen, training or evaluation.
    pub best: Rollout,
    pub curve: Vec<EpisodeRecord>,
    /// Environment steps including evaluation episodes.
    pub env_steps: usize,
    pub agent: SacAgent,
}

impl TrainOutcome {
    /// CSV with header `episode,reward,eval_fidelity`; the last column is
    /// empty for episodes without an evaluation.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("episode,reward,eval_fidelity\n");
        for r in &self.curve {
            let eval = r.eval_metric.map(|m| format!("{m:.12e}")).unwrap_or_default();
            writeln!(out, "{},{:.12e},{}", r.episode, r.reward, eval).unwrap();
        }
        out
    }
}

/// One episode with the policy mean; nothing is stored in the buffer.
pub fn evaluate<E: Environment>(env: &mut E, agent: &mut SacAgent) -> Result<Rollout> {
    let mut obs = env.reset();
    let mut actions = Vec::with_capacity(env.horizon());
    let mut total_reward = 0.0;
    loop {
        let (a, _) = agent.policy_sample(&obs, true);
        let st = env.step(&a)?;
        actions.push(a);
        total_reward += st.reward;
        obs = st.observation;
        if st.done {
            break;
        }
    }
    Ok(Rollout { actions, total_reward, metric: env.episode_metric() })
}

pub fn train<E: Environment>(env: &mut E, cfg: &SacConfig, seed: u64) -> Result<TrainOutcome> {
    let agent = SacAgent::new(env.observation_dim(), env.action_dim(), cfg.clone(), seed)?;
    train_agent(env, agent)
}

pub fn train_agent<E: Environment>(env: &mut E, mut agent: SacAgent) -> Result<TrainOutcome> {
    let cfg = agent.config.clone();
    let mut best: Option<Rollout> = None;
    let mut keep_best = |r: Rollout| {
        if best.as_ref().is_none_or(|b| r.total_reward > b.total_reward) {
            best = Some(r);
        }
    };
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut env_steps = 0usize;

    for episode in 0..cfg.episodes {
        let mut obs = env.reset();
        let mut actions = Vec::with_capacity(env.horizon());
        let mut total_reward = 0.0;
        loop {
            let a = if env_steps < cfg.warmup_steps {
                agent.random_action()
            } else {
                agent.policy_sample(&obs, false).0
            };
            let st = env.step(&a)?;
            env_steps += 1;
            total_reward += st.reward;
            agent.remember(Transition {
                state: std::mem::take(&mut obs),
                action: a.clone(),
                reward: st.reward,
                next_state: st.observation.clone(),
                done: st.done,
            });
            actions.push(a);
            obs = st.observation;
            if env_steps >= cfg.warmup_steps && agent.buffer.len() >= cfg.batch_size {
                for _ in 0..cfg.updates_per_step {
                    agent.update()?;
                }
            }
            if st.done {
                break;
            }
        }
        keep_best(Rollout { actions, total_reward, metric: env.episode_metric() });

        let mut eval_metric = None;
        if (episode + 1) % cfg.eval_interval == 0 && agent.updates() > 0 {
            let r = evaluate(env, &mut agent)?;
            env_steps += r.actions.len();
            eval_metric = r.metric;
            keep_best(r);
        }
        curve.push(EpisodeRecord { episode, reward: total_reward, eval_metric });
    }

    let best = best.unwrap_or(Rollout { actions: Vec::new(), total_reward: f64::NEG_INFINITY, metric: None });
    Ok(TrainOutcome { best, curve, env_steps, agent })
}

#[derive(Clone, Debug)]
pub struct GateTraining {
    pub best: PulseSchedule,
    pub best_fidelity: f64,
    pub outcome: TrainOutcome,
}

/// SAC on the gate environment; returns the best schedule found.
pub fn train_gate(p: &CircuitParams, cfg: &SacConfig, shape: ScheduleShape, seed: u64) -> Result<GateTraining> {
    let mut env = GateEnv::new(p, shape)?;
    let outcome = train(&mut env, cfg, seed)?;
    let best = env.schedule_from_actions(&outcome.best.actions)?;
    let best_fidelity = outcome.best.metric.unwrap_or(f64::NAN);
    Ok(GateTraining { best, best_fidelity, outcome })
}
