use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::env::vec_env::{sample_start, sample_transition};
use crate::env::{MdpSpec, Observation};
use crate::error::{Error, Result};
use crate::rng::{sample_categorical, stream_rng, Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Actions drawn from the policy.
    Sample,
    /// Arg-max of the policy logits (or of the quantile means for IQN).
    Greedy,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(EvalMode::Sample),
            "greedy" => Ok(EvalMode::Greedy),
            _ => Err(Error::Config(format!("unknown eval mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean: f64,
    /// Population standard deviation of `returns`.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub returns: Vec<f64>,
}

impl EvalSummary {
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Empty("episode returns"));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        Ok(Self {
            episodes: returns.len(),
            mean,
            std,
            min: returns.iter().copied().fold(f64::INFINITY, f64::min),
            max: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            returns,
        })
    }
}

pub(crate) fn choose_action(agent: &Agent, obs: &[f64], mode: EvalMode, rng: &mut Rng) -> usize {
    match mode {
        EvalMode::Greedy => agent.greedy_action(obs),
        EvalMode::Sample => sample_categorical(rng, &agent.action_probs(obs, 0.0)),
    }
}

/// Plays one episode from `state`, optionally forcing the first action.
/// Returns the `gamma`-discounted return.
pub(crate) fn run_episode(
    agent: &Agent,
    spec: &MdpSpec,
    state: usize,
    first_action: Option<usize>,
    mode: EvalMode,
    gamma: f64,
    rng: &mut Rng,
) -> f64 {
    let mut s = state;
    let mut g = 0.0;
    let mut discount = 1.0;
    for t in 0..spec.horizon {
        let action = match (t, first_action) {
            (0, Some(a)) => a,
            _ => choose_action(agent, &Observation::one_hot(spec.n_states, s), mode, rng),
        };
        let (next, r) = sample_transition(spec, s, action, rng);
        g += discount * r;
        discount *= gamma;
        if spec.terminal[next] {
            break;
        }
        s = next;
    }
    g
}

/// Runs `n_episodes` to termination. Episode `k` draws all randomness from
/// its own stream derived from `(seed, k)`.
pub fn evaluate(
    agent: &Agent,
    spec: &MdpSpec,
    n_episodes: usize,
    seed: u64,
    mode: EvalMode,
    gamma: f64,
) -> Result<EvalSummary> {
    if n_episodes == 0 {
        return Err(Error::Empty("evaluation episodes"));
    }
    if agent.params.obs_dim() != spec.obs_dim() || agent.params.n_actions() != spec.n_actions {
        return Err(Error::DimensionMismatch {
            what: "agent vs environment",
            expected: spec.obs_dim(),
            got: agent.params.obs_dim(),
        });
    }
    let returns = (0..n_episodes)
        .map(|k| {
            let mut rng = stream_rng(seed, Stream::Eval, k as u64);
            let s0 = sample_start(spec, &mut rng);
            run_episode(agent, spec, s0, None, mode, gamma, &mut rng)
        })
        .collect();
    EvalSummary::from_returns(returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentKind;
    use crate::approximator::ArchConfig;
    use crate::env::{builtin, RewardAtom};

    fn arch() -> ArchConfig {
        ArchConfig {
            torso_widths: vec![8],
            n_cos: 4,
            n_quantiles: 4,
            distill_hidden: 4,
            ..ArchConfig::default()
        }
    }

    #[test]
    fn single_action_mdp_returns_its_mean() {
        let spec = MdpSpec {
            name: "single".into(),
            n_states: 2,
            n_actions: 1,
            transition: vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            reward: vec![vec![vec![RewardAtom { value: 0.75, prob: 1.0 }]], vec![vec![RewardAtom { value: 0.0, prob: 1.0 }]]],
            terminal: vec![false, true],
            horizon: 4,
            start_state: 0,
            start_distribution: None,
        };
        let agent = Agent::new(AgentKind::Ppo, arch(), 0, 2, 1).unwrap();
        let s = evaluate(&agent, &spec, 20, 3, EvalMode::Sample, 1.0).unwrap();
        assert!(s.returns.iter().all(|&r| r == 0.75));
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn greedy_is_deterministic() {
        let spec = builtin("SlipGrid").unwrap();
        let agent = Agent::new(AgentKind::PgRainbow, arch(), 1, spec.obs_dim(), spec.n_actions).unwrap();
        let a = evaluate(&agent, &spec, 10, 5, EvalMode::Greedy, 0.99).unwrap();
        let b = evaluate(&agent, &spec, 10, 5, EvalMode::Greedy, 0.99).unwrap();
        assert_eq!(a, b);
        assert!(evaluate(&agent, &spec, 0, 5, EvalMode::Greedy, 0.99).is_err());
    }

    #[test]
    fn summary_is_consistent() {
        let s = EvalSummary::from_returns(vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (3.0, 1.0, 6.0));
        assert!((s.std - 3.5f64.sqrt()).abs() < 1e-12);
    }
}
