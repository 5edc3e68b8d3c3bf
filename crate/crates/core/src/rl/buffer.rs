//! Uniform ring replay buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stored interaction. `r_total` is the shaped reward; `terminal` marks
/// true task termination (success), not horizon truncation, so bootstrapping
/// is masked only where the episode genuinely ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub r_total: f64,
    pub next_observation: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    write_head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            obs_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            write_head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insert one transition, evicting the oldest when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.observation.len() != self.obs_dim
            || t.next_observation.len() != self.obs_dim
            || t.action.len() != self.action_dim
        {
            return Err(Error::InvalidInput(format!(
                "transition dims (obs {}, next {}, act {}) do not match buffer ({}, {})",
                t.observation.len(),
                t.next_observation.len(),
                t.action.len(),
                self.obs_dim,
                self.action_dim
            )));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_head] = t;
        }
        self.write_head = (self.write_head + 1) % self.capacity;
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, batch: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.storage.is_empty() {
            return Err(Error::Usage("sample from empty replay buffer".into()));
        }
        Ok((0..batch)
            .map(|_| &self.storage[rng.random_range(0..self.storage.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
