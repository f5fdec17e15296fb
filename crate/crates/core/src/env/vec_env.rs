use std::ops::Deref;
use std::sync::Arc;

use crate::env::spec::MdpSpec;
use crate::error::{Error, Result};
use crate::rng::{sample_categorical, stream_rng, Rng, Stream};

/// One-hot state encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn one_hot(n_states: usize, state: usize) -> Self {
        let mut v = vec![0.0; n_states];
        v[state] = 1.0;
        Self(v)
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Observation {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-env outcome of [`VecEnv::step_all`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Next observations; after `done` this is already the reset observation.
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Undiscounted return of each episode that finished on this step.
    pub episode_returns: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
struct Slot {
    state: usize,
    steps: usize,
    episode_return: f64,
    rng: Rng,
}

/// A batch of independent copies of one MDP with auto-reset.
///
/// Env `i` draws all of its randomness from the stream `(seed, Env, i)`, so
/// outcomes do not depend on stepping order.
#[derive(Debug, Clone)]
pub struct VecEnv {
    spec: Arc<MdpSpec>,
    slots: Vec<Slot>,
}

/// Samples a start state and the resulting observation.
pub(crate) fn sample_start(spec: &MdpSpec, rng: &mut Rng) -> usize {
    match &spec.start_distribution {
        Some(d) => sample_categorical(rng, d),
        None => spec.start_state,
    }
}

/// Samples `(next_state, reward)` for one transition.
pub(crate) fn sample_transition(spec: &MdpSpec, state: usize, action: usize, rng: &mut Rng) -> (usize, f64) {
    let next = sample_categorical(rng, &spec.transition[state][action]);
    let atoms = &spec.reward[state][action];
    let reward = if atoms.len() == 1 {
        atoms[0].value
    } else {
        let probs: Vec<f64> = atoms.iter().map(|r| r.prob).collect();
        atoms[sample_categorical(rng, &probs)].value
    };
    (next, reward)
}

impl VecEnv {
    /// Builds `n_envs` copies and resets each of them.
    pub fn new(spec: Arc<MdpSpec>, n_envs: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if n_envs == 0 {
            return Err(Error::Config("n_envs must be >= 1".into()));
        }
        let slots = (0..n_envs)
            .map(|i| {
                let mut rng = stream_rng(seed, Stream::Env, i as u64);
                let state = sample_start(&spec, &mut rng);
                Slot {
                    state,
                    steps: 0,
                    episode_return: 0.0,
                    rng,
                }
            })
            .collect();
        Ok(Self { spec, slots })
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.spec
    }

    pub fn n_envs(&self) -> usize {
        self.slots.len()
    }

    pub fn state(&self, env_index: usize) -> usize {
        self.slots[env_index].state
    }

    pub fn observation(&self, env_index: usize) -> Observation {
        Observation::one_hot(self.spec.n_states, self.slots[env_index].state)
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.n_envs()).map(|i| self.observation(i)).collect()
    }

    pub fn reset(&mut self, env_index: usize) -> Result<Observation> {
        let len = self.slots.len();
        let slot = self.slots.get_mut(env_index).ok_or(Error::IndexOutOfRange {
            what: "env",
            index: env_index,
            len,
        })?;
        slot.state = sample_start(&self.spec, &mut slot.rng);
        slot.steps = 0;
        slot.episode_return = 0.0;
        Ok(Observation::one_hot(self.spec.n_states, slot.state))
    }

    pub fn step_all(&mut self, actions: &[usize]) -> Result<StepOutput> {
        if actions.len() != self.slots.len() {
            return Err(Error::LengthMismatch {
                what: "actions vs envs",
                a: actions.len(),
                b: self.slots.len(),
            });
        }
        let n_actions = self.spec.n_actions;
        if let Some(&action) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::InvalidAction { action, n_actions });
        }
        let n = self.slots.len();
        let mut out = StepOutput {
            observations: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            episode_returns: Vec::with_capacity(n),
        };
        let spec = &*self.spec;
        for (slot, &action) in self.slots.iter_mut().zip(actions) {
            let (next, reward) = sample_transition(spec, slot.state, action, &mut slot.rng);
            slot.steps += 1;
            slot.episode_return += reward;
            let done = spec.terminal[next] || slot.steps >= spec.horizon;
            if done {
                out.episode_returns.push(Some(slot.episode_return));
                slot.state = sample_start(spec, &mut slot.rng);
                slot.steps = 0;
                slot.episode_return = 0.0;
            } else {
                out.episode_returns.push(None);
                slot.state = next;
            }
            out.observations.push(Observation::one_hot(spec.n_states, slot.state));
            out.rewards.push(reward);
            out.dones.push(done);
        }
        Ok(out)
    }
}
