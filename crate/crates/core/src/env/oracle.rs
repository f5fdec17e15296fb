//! Exact return distributions by backward dynamic programming.
//!
//! With `k` steps remaining, the return of `(s, a)` is the reward atom
//! convolved with the discounted successor distribution:
//!
//! ```text
//! Z_k(s, a) = R(s, a) + gamma * Z'     where
//! Z'        = mix_{s'} P(s'|s,a) * [ delta_0                  if s' terminal or k = 1
//!                                  | mix_{a'} pi(a'|s') Z_{k-1}(s', a')  otherwise ]
//! ```
//!
//! Episodes start with `horizon` steps remaining.

use crate::env::distribution::{normalize_atoms, DiscreteReturnDistribution, MERGE_TOL};
use crate::env::spec::{MdpSpec, TabularPolicy};
use crate::error::{Error, Result};

pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

type Atoms = Vec<(f64, f64)>;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub support_cap: usize,
    pub merge_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            support_cap: DEFAULT_SUPPORT_CAP,
            merge_tol: MERGE_TOL,
        }
    }
}

fn finish(atoms: Atoms, cfg: &OracleConfig) -> Result<Atoms> {
    let merged = normalize_atoms(atoms, cfg.merge_tol);
    if merged.len() > cfg.support_cap {
        return Err(Error::SupportCapExceeded {
            atoms: merged.len(),
            cap: cfg.support_cap,
        });
    }
    Ok(merged)
}

/// Exact `Z(s, a)` tables for every state-action pair at full horizon.
pub fn exact_return_distributions(
    spec: &MdpSpec,
    policy: &TabularPolicy,
    gamma: f64,
    cfg: &OracleConfig,
) -> Result<Vec<Vec<DiscreteReturnDistribution>>> {
    spec.validate()?;
    spec.validate_policy(policy)?;
    let (ns, na) = (spec.n_states, spec.n_actions);
    // State-value distributions with k-1 steps remaining; None for k-1 = 0.
    let mut prev_v: Option<Vec<Atoms>> = None;
    let mut q: Vec<Vec<Atoms>> = Vec::new();
    for _k in 1..=spec.horizon {
        q = Vec::with_capacity(ns);
        for s in 0..ns {
            let mut row = Vec::with_capacity(na);
            for a in 0..na {
                let mut cont: Atoms = Vec::new();
                for (s2, &p) in spec.transition[s][a].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    match (&prev_v, spec.terminal[s2]) {
                        (Some(v), false) => cont.extend(v[s2].iter().map(|&(x, w)| (x, w * p))),
                        _ => cont.push((0.0, p)),
                    }
                }
                let cont = finish(cont, cfg)?;
                let mut atoms = Vec::with_capacity(cont.len() * spec.reward[s][a].len());
                for r in &spec.reward[s][a] {
                    atoms.extend(cont.iter().map(|&(g, w)| (r.value + gamma * g, r.prob * w)));
                }
                if atoms.len() > cfg.support_cap.saturating_mul(64) {
                    return Err(Error::SupportCapExceeded {
                        atoms: atoms.len(),
                        cap: cfg.support_cap,
                    });
                }
                row.push(finish(atoms, cfg)?);
            }
            q.push(row);
        }
        let v = (0..ns)
            .map(|s| {
                let mut atoms = Vec::new();
                for a in 0..na {
                    let pa = policy[s][a];
                    if pa > 0.0 {
                        atoms.extend(q[s][a].iter().map(|&(x, w)| (x, w * pa)));
                    }
                }
                finish(atoms, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        prev_v = Some(v);
    }
    q.into_iter()
        .map(|row| row.into_iter().map(DiscreteReturnDistribution::from_atoms).collect())
        .collect()
}

/// Exact distribution of the discounted return after taking `action` in
/// `state` with the full horizon ahead, then following `policy`.
pub fn exact_return_distribution(
    spec: &MdpSpec,
    policy: &TabularPolicy,
    gamma: f64,
    state: usize,
    action: usize,
) -> Result<DiscreteReturnDistribution> {
    exact_return_distribution_with(spec, policy, gamma, state, action, &OracleConfig::default())
}

pub fn exact_return_distribution_with(
    spec: &MdpSpec,
    policy: &TabularPolicy,
    gamma: f64,
    state: usize,
    action: usize,
    cfg: &OracleConfig,
) -> Result<DiscreteReturnDistribution> {
    if state >= spec.n_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: state,
            len: spec.n_states,
        });
    }
    if action >= spec.n_actions {
        return Err(Error::InvalidAction {
            action,
            n_actions: spec.n_actions,
        });
    }
    let mut table = exact_return_distributions(spec, policy, gamma, cfg)?;
    Ok(table.swap_remove(state).swap_remove(action))
}

/// Distribution of the return from a fresh reset (start distribution mixed in).
pub fn exact_start_distribution(
    spec: &MdpSpec,
    policy: &TabularPolicy,
    gamma: f64,
) -> Result<DiscreteReturnDistribution> {
    let table = exact_return_distributions(spec, policy, gamma, &OracleConfig::default())?;
    let starts = start_weights(spec);
    let mut atoms = Vec::new();
    for (s, &ps) in starts.iter().enumerate() {
        for a in 0..spec.n_actions {
            let w = ps * policy[s][a];
            if w > 0.0 {
                atoms.extend(table[s][a].atoms().map(|(x, p)| (x, p * w)));
            }
        }
    }
    DiscreteReturnDistribution::from_atoms(atoms)
}

pub(crate) fn start_weights(spec: &MdpSpec) -> Vec<f64> {
    match &spec.start_distribution {
        Some(d) => d.clone(),
        None => {
            let mut w = vec![0.0; spec.n_states];
            w[spec.start_state] = 1.0;
            w
        }
    }
}

/// Expected-value policy evaluation, `Q^pi(s, a)` at full horizon.
///
/// Kept separate from the distributional recursion so the two can check
/// each other.
pub fn tabular_q(spec: &MdpSpec, policy: &TabularPolicy, gamma: f64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    spec.validate_policy(policy)?;
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut v_prev = vec![0.0; ns];
    let mut q = vec![vec![0.0; na]; ns];
    for k in 1..=spec.horizon {
        for s in 0..ns {
            for a in 0..na {
                let cont: f64 = if k == 1 {
                    0.0
                } else {
                    spec.transition[s][a]
                        .iter()
                        .enumerate()
                        .filter(|&(s2, _)| !spec.terminal[s2])
                        .map(|(s2, &p)| p * v_prev[s2])
                        .sum()
                };
                q[s][a] = spec.mean_reward(s, a) + gamma * cont;
            }
        }
        for s in 0..ns {
            v_prev[s] = (0..na).map(|a| policy[s][a] * q[s][a]).sum();
        }
    }
    Ok(q)
}
