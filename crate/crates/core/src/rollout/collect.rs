use crate::agent::Agent;
use crate::env::{Observation, VecEnv};
use crate::error::{Error, Result};
use crate::rng::{sample_categorical, Rng};

use super::buffer::{ReplayBuffer, Transition};
use super::gae::compute_gae_batch;

/// One on-policy rollout in time-major `[T x n_envs]` layout.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs: Vec<Observation>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Log-probability of each action under the behaviour policy.
    pub logprobs: Vec<f64>,
    /// Critic values at collection time.
    pub values: Vec<f64>,
    /// Critic value of the observation after the final step, per env.
    pub bootstrap_values: Vec<f64>,
    /// Filled by [`RolloutBatch::compute_advantages`].
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Undiscounted returns of episodes that finished during the rollout.
    pub episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, lam: f64) -> Result<()> {
        let (adv, ret) = compute_gae_batch(
            &self.rewards,
            &self.values,
            &self.dones,
            &self.bootstrap_values,
            gamma,
            lam,
        )?;
        if adv.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("advantages".into()));
        }
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Steps every env `n_steps` times with actions drawn from the agent's
/// behaviour distribution, appending each transition to `buffer` if given.
pub fn collect(
    venv: &mut VecEnv,
    agent: &Agent,
    n_steps: usize,
    gate_open: bool,
    epsilon: f64,
    mut buffer: Option<&mut ReplayBuffer>,
    rng: &mut Rng,
) -> Result<RolloutBatch> {
    if n_steps == 0 {
        return Err(Error::Config("rollout length must be at least 1".into()));
    }
    let n_envs = venv.n_envs();
    let total = n_steps * n_envs;
    let emb = agent.midpoint_embeddings();
    let mut batch = RolloutBatch {
        n_envs,
        n_steps,
        obs: Vec::with_capacity(total),
        actions: Vec::with_capacity(total),
        rewards: Vec::with_capacity(total),
        dones: Vec::with_capacity(total),
        logprobs: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
        bootstrap_values: Vec::with_capacity(n_envs),
        advantages: Vec::new(),
        returns: Vec::new(),
        episode_returns: Vec::new(),
    };
    let mut obs = venv.observations();
    for _ in 0..n_steps {
        let mut actions = Vec::with_capacity(n_envs);
        for o in &obs {
            let (probs, value) = agent.policy_and_value(o, epsilon, gate_open, &emb)?;
            let a = sample_categorical(rng, &probs);
            batch.logprobs.push(probs[a].ln());
            batch.values.push(value);
            actions.push(a);
        }
        let out = venv.step_all(&actions)?;
        for (i, o) in obs.iter().enumerate() {
            if let Some(buf) = buffer.as_deref_mut() {
                buf.push(Transition {
                    obs: o.clone(),
                    action: actions[i],
                    reward: out.rewards[i],
                    next_obs: out.observations[i].clone(),
                    done: out.dones[i],
                })?;
            }
        }
        batch.obs.extend(obs);
        batch.actions.extend(&actions);
        batch.rewards.extend(&out.rewards);
        batch.dones.extend(&out.dones);
        batch.episode_returns.extend(out.episode_returns.iter().flatten());
        obs = out.observations;
    }
    for o in &obs {
        batch.bootstrap_values.push(agent.policy_and_value(o, epsilon, gate_open, &emb)?.1);
    }
    Ok(batch)
}
