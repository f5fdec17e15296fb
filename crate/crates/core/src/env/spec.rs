use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row-stochasticity checks on transition, reward and policy tables.
pub const PROB_TOL: f64 = 1e-9;

/// One atom of a finite reward distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardAtom {
    pub value: f64,
    pub prob: f64,
}

impl RewardAtom {
    pub const fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }
}

/// A finite, finite-horizon MDP with discrete reward distributions.
///
/// The TOML layout mirrors the struct fields:
///
/// ```toml
/// name = "Chain3"
/// n_states = 3
/// n_actions = 1
/// horizon = 5
/// start_state = 0
/// terminal = [false, false, true]
/// # transition[s][a][s'] = P(s' | s, a)
/// transition = [[[0.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]], [[0.0, 0.0, 1.0]]]
/// # reward[s][a] = list of { value, prob } atoms
/// reward = [
///   [[{ value = 0.0, prob = 1.0 }]],
///   [[{ value = 1.0, prob = 0.5 }, { value = -1.0, prob = 0.5 }]],
///   [[{ value = 0.0, prob = 1.0 }]],
/// ]
/// # optional: randomized reset over states
/// # start_distribution = [0.5, 0.5, 0.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub name: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<RewardAtom>>>,
    pub terminal: Vec<bool>,
    pub horizon: usize,
    pub start_state: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_distribution: Option<Vec<f64>>,
}

/// Action probabilities per state, `policy[s][a]`.
pub type TabularPolicy = Vec<Vec<f64>>;

fn check_distribution(what: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidSpec(format!("{what}: bad probability {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidSpec(format!("{what}: probabilities sum to {sum}")));
    }
    Ok(())
}

impl MdpSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: MdpSpec =
            toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidSpec("need at least one state and action".into()));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidSpec("horizon must be >= 1".into()));
        }
        if self.transition.len() != ns || self.reward.len() != ns || self.terminal.len() != ns {
            return Err(Error::InvalidSpec("table row counts must equal n_states".into()));
        }
        if self.start_state >= ns {
            return Err(Error::InvalidSpec(format!("start_state {} out of range", self.start_state)));
        }
        for s in 0..ns {
            if self.transition[s].len() != na || self.reward[s].len() != na {
                return Err(Error::InvalidSpec(format!("state {s}: expected {na} actions")));
            }
            for a in 0..na {
                let row = &self.transition[s][a];
                if row.len() != ns {
                    return Err(Error::InvalidSpec(format!("P(.|{s},{a}) has {} entries", row.len())));
                }
                check_distribution(&format!("P(.|{s},{a})"), row.iter().copied())?;
                let atoms = &self.reward[s][a];
                if atoms.is_empty() || atoms.iter().any(|r| !r.value.is_finite()) {
                    return Err(Error::InvalidSpec(format!("R({s},{a}) needs finite atoms")));
                }
                check_distribution(&format!("R({s},{a})"), atoms.iter().map(|r| r.prob))?;
                if self.terminal[s] {
                    if (row[s] - 1.0).abs() > PROB_TOL {
                        return Err(Error::InvalidSpec(format!("terminal state {s} must self-loop")));
                    }
                    if atoms.iter().any(|r| r.value != 0.0 && r.prob > 0.0) {
                        return Err(Error::InvalidSpec(format!("terminal state {s} must pay 0")));
                    }
                }
            }
        }
        match &self.start_distribution {
            Some(d) => {
                if d.len() != ns {
                    return Err(Error::InvalidSpec("start_distribution length".into()));
                }
                check_distribution("start_distribution", d.iter().copied())?;
                if d.iter().zip(&self.terminal).any(|(&p, &t)| t && p > 0.0) {
                    return Err(Error::InvalidSpec("start_distribution puts mass on a terminal".into()));
                }
            }
            None => {
                if self.terminal[self.start_state] {
                    return Err(Error::InvalidSpec("start_state is terminal".into()));
                }
            }
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.n_states
    }

    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a].iter().map(|r| r.value * r.prob).sum()
    }

    /// Copy of this spec with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn uniform_policy(&self) -> TabularPolicy {
        vec![vec![1.0 / self.n_actions as f64; self.n_actions]; self.n_states]
    }

    pub fn validate_policy(&self, policy: &TabularPolicy) -> Result<()> {
        if policy.len() != self.n_states {
            return Err(Error::MalformedPolicy(format!(
                "{} rows for {} states",
                policy.len(),
                self.n_states
            )));
        }
        for (s, row) in policy.iter().enumerate() {
            if row.len() != self.n_actions {
                return Err(Error::MalformedPolicy(format!("row {s} has {} entries", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::MalformedPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::suite::builtin_suite;

    #[test]
    fn toml_roundtrip_of_builtins() {
        for spec in builtin_suite() {
            let text = spec.to_toml_string().unwrap();
            assert_eq!(MdpSpec::from_toml_str(&text).unwrap(), spec);
        }
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let mut spec = builtin_suite().remove(0);
        spec.transition[0][0][0] += 0.01;
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn rejects_paying_terminal() {
        let mut spec = builtin_suite().remove(0);
        let t = spec.terminal.iter().position(|&t| t).unwrap();
        spec.reward[t][0] = vec![RewardAtom::new(1.0, 1.0)];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_bad_policy() {
        let spec = builtin_suite().remove(0);
        let mut pi = spec.uniform_policy();
        pi[0][0] = 0.9;
        assert!(matches!(spec.validate_policy(&pi), Err(Error::MalformedPolicy(_))));
    }

    #[test]
    fn parses_documented_layout() {
        let text = r#"
name = "Chain3"
n_states = 3
n_actions = 1
horizon = 5
start_state = 0
terminal = [false, false, true]
transition = [[[0.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]], [[0.0, 0.0, 1.0]]]
reward = [
  [[{ value = 0.0, prob = 1.0 }]],
  [[{ value = 1.0, prob = 0.5 }, { value = -1.0, prob = 0.5 }]],
  [[{ value = 0.0, prob = 1.0 }]],
]
"#;
        let spec = MdpSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.n_states, 3);
        assert_eq!(spec.mean_reward(1, 0), 0.0);
    }
}
