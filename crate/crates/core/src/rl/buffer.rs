use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{precondition, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Normalized action in [-1, 1].
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Stacked transitions; row `b` of each array is sample `b`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or_else(|| precondition("empty batch"))?;
        let (sd, ad) = (first.state.len(), first.action.len());
        let n = items.len();
        let mut states = Array2::zeros((n, sd));
        let mut next_states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        for (b, t) in items.iter().enumerate() {
            if t.state.len() != sd || t.next_state.len() != sd || t.action.len() != ad {
                return Err(precondition("inconsistent transition shapes"));
            }
            states.row_mut(b).assign(&Array1::from(t.state.clone()));
            next_states.row_mut(b).assign(&Array1::from(t.next_state.clone()));
            actions.row_mut(b).assign(&Array1::from(t.action.clone()));
        }
        Ok(Self {
            states,
            actions,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states,
            dones: items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        })
    }
}

/// Fixed-capacity ring store; once full, each push evicts the oldest entry.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(precondition("replay capacity must be positive"));
        }
        Ok(Self { capacity, items: Vec::new(), head: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items[self.head..].iter().chain(&self.items[..self.head])
    }

    /// Uniform sampling with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Result<Batch> {
        if self.items.is_empty() || batch_size == 0 {
            return Err(precondition("cannot sample from an empty buffer or with batch size 0"));
        }
        let picks: Vec<&Transition> =
            (0..batch_size).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect();
        Batch::from_transitions(&picks)
    }
}
