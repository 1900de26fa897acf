use crate::circuit::{CircuitParams, TRACKED};
use crate::control::{cz_fidelity, reward, GateModel, Propagator, PulseSchedule, ScheduleShape};
use crate::error::{precondition, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a fixed horizon and actions in [-1, 1].
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    /// Figure of merit of the finished episode, if one is available.
    fn episode_metric(&self) -> Option<f64>;
}

fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(precondition(format!("expected {dim} action components, got {}", action.len())));
    }
    if action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
        return Err(precondition("actions must lie in [-1, 1]"));
    }
    Ok(())
}

/// Observation length of [`GateEnv`]: populations of the tracked labels for
/// each computational initial state, then the elapsed fraction of the gate.
pub const GATE_OBS_DIM: usize = 4 * TRACKED.len() + 1;

/// One coupler frequency per step; sparse reward `-log10(1 - F)` at the end.
#[derive(Clone, Debug)]
pub struct GateEnv {
    model: GateModel,
    shape: ScheduleShape,
    prop: Propagator,
    fidelity: Option<f64>,
}

impl GateEnv {
    pub fn new(params: &CircuitParams, shape: ScheduleShape) -> Result<Self> {
        Self::from_model(GateModel::new(params)?, shape)
    }

    pub fn from_model(model: GateModel, shape: ScheduleShape) -> Result<Self> {
        shape.validate()?;
        let prop = Propagator::new(model.dim());
        Ok(Self { model, shape, prop, fidelity: None })
    }

    pub fn model(&self) -> &GateModel {
        &self.model
    }

    pub fn shape(&self) -> ScheduleShape {
        self.shape
    }

    pub fn coupler_frequency(&self, action: f64) -> f64 {
        self.shape.denormalize(action)
    }

    pub fn schedule_from_actions(&self, actions: &[Vec<f64>]) -> Result<PulseSchedule> {
        PulseSchedule::new(self.shape, actions.iter().map(|a| self.coupler_frequency(a[0])).collect())
    }

    fn observe(&self) -> Vec<f64> {
        let pops = self.model.tracked_populations(self.prop.unitary());
        let mut obs = Vec::with_capacity(GATE_OBS_DIM);
        for s in 0..4 {
            obs.extend(pops.iter().map(|row| row[s]));
        }
        obs.push(self.prop.steps() as f64 / self.shape.steps() as f64);
        obs
    }
}

impl Environment for GateEnv {
    fn observation_dim(&self) -> usize {
        GATE_OBS_DIM
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.shape.steps()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.prop.reset();
        self.fidelity = None;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.prop.steps() >= self.horizon() {
            return Err(Error::EpisodeFinished);
        }
        check_action(action, 1)?;
        let wc = self.coupler_frequency(action[0]);
        self.prop.apply(&self.model, wc, self.shape.step_len)?;
        let done = self.prop.steps() == self.horizon();
        let mut r = 0.0;
        if done {
            let f = cz_fidelity(&self.model.computational_block(self.prop.unitary())).fidelity;
            self.fidelity = Some(f);
            r = reward(f);
        }
        Ok(Step { observation: self.observe(), reward: r, done })
    }

    fn episode_metric(&self) -> Option<f64> {
        self.fidelity
    }
}

/// Deterministic 1-D point mass: `x <- x + speed * a` for a fixed number of
/// steps, reward `1 - |x - target|` at the end. The best achievable return
/// is 1 whenever the target is within reach.
#[derive(Clone, Debug)]
pub struct PointEnv {
    pub target: f64,
    pub speed: f64,
    pub steps: usize,
    x: f64,
    t: usize,
    last_return: Option<f64>,
}

impl Default for PointEnv {
    fn default() -> Self {
        Self { target: 0.6, speed: 0.25, steps: 5, x: 0.0, t: 0, last_return: None }
    }
}

impl PointEnv {
    pub fn optimal_return(&self) -> f64 {
        1.0 - (self.target.abs() - self.speed * self.steps as f64).max(0.0)
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.x, self.t as f64 / self.steps as f64]
    }
}

impl Environment for PointEnv {
    fn observation_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.steps
    }

    fn reset(&mut self) -> Vec<f64> {
        self.x = 0.0;
        self.t = 0;
        self.last_return = None;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.t >= self.steps {
            return Err(Error::EpisodeFinished);
        }
        check_action(action, 1)?;
        self.x += self.speed * action[0];
        self.t += 1;
        let done = self.t == self.steps;
        let mut r = 0.0;
        if done {
            r = 1.0 - (self.x - self.target).abs();
            self.last_return = Some(r);
        }
        Ok(Step { observation: self.observe(), reward: r, done })
    }

    fn episode_metric(&self) -> Option<f64> {
        self.last_return
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> GateEnv {
        GateEnv::new(&CircuitParams::default(), ScheduleShape::with_gate_time(10.0).unwrap()).unwrap()
    }

    #[test]
    fn reset_observation() {
        let mut e = env();
        let obs = e.reset();
        assert_eq!(obs.len(), 37);
        for s in 0..4 {
            for l in 0..TRACKED.len() {
                let expect = if l == s { 1.0 } else { 0.0 };
                assert!((obs[s * TRACKED.len() + l] - expect).abs() < 1e-14);
            }
        }
        assert_eq!(obs[36], 0.0);
    }

    #[test]
    fn idle_action_barely_moves_populations() {
        let mut e = env();
        let before = e.reset();
        let st = e.step(&[1.0]).unwrap();
        assert!((e.coupler_frequency(1.0) - 6.38).abs() < 1e-12);
        // Qubit 1 is detuned to 5 GHz but the coupler stays dispersive.
        for (a, b) in before[..36].iter().zip(&st.observation[..36]) {
            assert!((a - b).abs() < 0.05);
        }
        assert!((st.observation[36] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exactly_one_reward_and_finish_error() {
        let mut e = env();
        e.reset();
        let mut nonzero = 0;
        for k in 0..10 {
            let st = e.step(&[0.3 - 0.05 * k as f64]).unwrap();
            assert_eq!(st.done, k == 9);
            if st.reward != 0.0 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 1);
        assert!(e.episode_metric().is_some());
        assert!(matches!(e.step(&[0.0]), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn rejects_bad_actions() {
        let mut e = env();
        e.reset();
        assert!(e.step(&[1.5]).is_err());
        assert!(e.step(&[f64::NAN]).is_err());
        assert!(e.step(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn point_env_optimum() {
        let mut p = PointEnv::default();
        assert_eq!(p.optimal_return(), 1.0);
        p.reset();
        let mut last = None;
        for _ in 0..5 {
            last = Some(p.step(&[0.48]).unwrap());
        }
        let st = last.unwrap();
        assert!(st.done);
        assert!((st.reward - 1.0).abs() < 1e-12);
    }
}
