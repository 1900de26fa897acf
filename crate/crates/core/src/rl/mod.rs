//! Soft actor-critic from scratch and the gate-design environment.

mod buffer;
mod env;
mod mlp;
mod sac;
mod train;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use env::{Environment, GateEnv, PointEnv, Step, GATE_OBS_DIM};
pub use mlp::{Activation, Adam, ForwardCache, Gradients, Layer, Mlp};
pub use sac::{critic_loss_and_grads, Checkpoint, PolicyBatch, SacAgent, SacConfig, UpdateStats, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{evaluate, train, train_agent, train_gate, EpisodeRecord, GateTraining, Rollout, TrainOutcome};
