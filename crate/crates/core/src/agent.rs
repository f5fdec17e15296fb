//! Agent variants and their acting/critic rules.

use std::fmt;
use std::str::FromStr;

use crate::approximator::nn::{argmax, softmax};
use crate::approximator::params::mix_quantiles;
use crate::approximator::{init_params, AgentParams, ArchConfig};
use crate::env::distribution::midpoint_taus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Actor-critic with the plain value head.
    Ppo,
    /// Quantile network acting epsilon-greedily on its mean, no policy net.
    Iqn,
    /// Actor-critic whose critic is the distillation net over `(V_theta, q_phi)`.
    PgRainbow,
    /// Actor-critic whose critic is replaced by the IQN state value; the two
    /// networks are trained separately and share nothing.
    Disjoint,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Ppo, AgentKind::Iqn, AgentKind::PgRainbow, AgentKind::Disjoint];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Ppo => "ppo",
            AgentKind::Iqn => "iqn",
            AgentKind::PgRainbow => "pg-rainbow",
            AgentKind::Disjoint => "disjoint",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn uses_iqn(self) -> bool {
        !matches!(self, AgentKind::Ppo)
    }

    pub fn uses_policy_net(self) -> bool {
        !matches!(self, AgentKind::Iqn)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "ppo" => Ok(AgentKind::Ppo),
            "iqn" => Ok(AgentKind::Iqn),
            "pg-rainbow" | "pgrainbow" => Ok(AgentKind::PgRainbow),
            "disjoint" => Ok(AgentKind::Disjoint),
            _ => Err(Error::Config(format!("unknown agent '{s}'"))),
        }
    }
}

/// Trained parameters plus everything needed to act with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub arch: ArchConfig,
    pub params: AgentParams,
}

/// Cosine embeddings of the midpoint quantile levels. They depend only on
/// `phi`, so callers acting many times between updates compute them once.
#[derive(Debug, Clone)]
pub struct MidpointEmbeddings(Vec<Vec<f64>>);

impl Agent {
    pub fn new(kind: AgentKind, arch: ArchConfig, seed: u64, obs_dim: usize, n_actions: usize) -> Result<Self> {
        let params = init_params(seed, &arch, obs_dim, n_actions)?;
        Ok(Self { kind, arch, params })
    }

    pub fn midpoint_embeddings(&self) -> MidpointEmbeddings {
        let phi = &self.params.phi;
        MidpointEmbeddings(
            midpoint_taus(self.arch.n_quantiles)
                .into_iter()
                .map(|t| phi.embed_tau(t).1)
                .collect(),
        )
    }

    /// Quantile values at the midpoint levels, `[action][tau]`.
    pub fn midpoint_quantiles(&self, obs: &[f64]) -> Vec<f64> {
        self.midpoint_quantiles_with(obs, &self.midpoint_embeddings())
    }

    pub fn midpoint_quantiles_with(&self, obs: &[f64], emb: &MidpointEmbeddings) -> Vec<f64> {
        let phi = &self.params.phi;
        let torso = phi.torso.forward(obs);
        phi.values_with_embeddings(torso.output(), &emb.0)
    }

    /// State quantile vector `q_j = sum_a pi(a|s) Z(s, a, tau_j)` under the
    /// current policy.
    pub fn state_quantiles_with(&self, obs: &[f64], emb: &MidpointEmbeddings) -> Vec<f64> {
        let probs = softmax(&self.params.theta.forward(obs).logits);
        mix_quantiles(&probs, &self.midpoint_quantiles_with(obs, emb), self.arch.n_quantiles)
    }

    fn mean_q(&self, obs: &[f64], emb: &MidpointEmbeddings) -> Vec<f64> {
        let n = self.arch.n_quantiles;
        self.midpoint_quantiles_with(obs, emb)
            .chunks(n)
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect()
    }

    fn epsilon_greedy(q: &[f64], epsilon: f64) -> Vec<f64> {
        let n = q.len() as f64;
        let best = argmax(q);
        (0..q.len())
            .map(|a| epsilon / n + if a == best { 1.0 - epsilon } else { 0.0 })
            .collect()
    }

    /// Action distribution the agent samples from. The IQN agent uses
    /// `epsilon`-greedy over its quantile means; the others ignore `epsilon`.
    pub fn action_probs(&self, obs: &[f64], epsilon: f64) -> Vec<f64> {
        match self.kind {
            AgentKind::Iqn => Self::epsilon_greedy(&self.mean_q(obs, &self.midpoint_embeddings()), epsilon),
            _ => softmax(&self.params.theta.forward(obs).logits),
        }
    }

    pub fn greedy_action(&self, obs: &[f64]) -> usize {
        match self.kind {
            AgentKind::Iqn => argmax(&self.mean_q(obs, &self.midpoint_embeddings())),
            _ => argmax(&self.params.theta.forward(obs).logits),
        }
    }

    /// The critic's estimate of `V(s)` with the distillation gate open.
    pub fn critic_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.policy_and_value(obs, 0.0, true, &self.midpoint_embeddings())?.1)
    }

    /// Behaviour distribution and critic value in one pass. With the gate
    /// closed PG-Rainbow reports `V_theta` instead of the fused value.
    pub fn policy_and_value(
        &self,
        obs: &[f64],
        epsilon: f64,
        gate_open: bool,
        emb: &MidpointEmbeddings,
    ) -> Result<(Vec<f64>, f64)> {
        let n = self.arch.n_quantiles;
        match self.kind {
            AgentKind::Iqn => {
                let q = self.mean_q(obs, emb);
                Ok((Self::epsilon_greedy(&q, epsilon), q[argmax(&q)]))
            }
            AgentKind::Ppo => {
                let c = self.params.theta.forward(obs);
                Ok((softmax(&c.logits), c.value))
            }
            AgentKind::PgRainbow if !gate_open => {
                let c = self.params.theta.forward(obs);
                Ok((softmax(&c.logits), c.value))
            }
            AgentKind::PgRainbow | AgentKind::Disjoint => {
                let c = self.params.theta.forward(obs);
                let probs = softmax(&c.logits);
                let q = mix_quantiles(&probs, &self.midpoint_quantiles_with(obs, emb), n);
                let v = if self.kind == AgentKind::Disjoint {
                    q.iter().sum::<f64>() / n as f64
                } else {
                    self.params.psi.fuse(c.value, &q)?
                };
                Ok((probs, v))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for k in AgentKind::ALL {
            assert_eq!(k.as_str().parse::<AgentKind>().unwrap(), k);
            assert_eq!(AgentKind::from_code(k.code()), Some(k));
        }
        assert!("dqn".parse::<AgentKind>().is_err());
    }
}
