use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::huber::{quantile_huber, quantile_huber_grad};
use crate::approximator::networks::{ActorCritic, QuantileNet};
use crate::approximator::nn::{argmax, softmax, ParamSet};
use crate::error::{Error, Result};
use crate::rng::{sample_categorical, Rng};
use crate::rollout::Transition;

/// How the bootstrap action at the next state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bootstrap {
    /// `argmax_a mean_j Z_target(s', a, tau'_j)`.
    #[default]
    Greedy,
    /// An action sampled from the current PPO policy at `s'`.
    Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqnLossConfig {
    pub n: usize,
    pub n_prime: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub bootstrap: Bootstrap,
}

impl Default for IqnLossConfig {
    fn default() -> Self {
        Self {
            n: 8,
            n_prime: 8,
            kappa: 1.0,
            gamma: 0.99,
            bootstrap: Bootstrap::Greedy,
        }
    }
}

impl IqnLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_prime == 0 {
            return Err(Error::Config("IQN sample counts must be at least 1".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Bootstrap targets `r + gamma * Z_target(s', a', tau'_j)` for one transition.
fn targets(
    phi_target: &QuantileNet,
    t: &Transition,
    cfg: &IqnLossConfig,
    policy: Option<&ActorCritic>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let taus_prime: Vec<f64> = (0..cfg.n_prime).map(|_| rng.gen::<f64>()).collect();
    if t.done {
        return Ok(vec![t.reward; cfg.n_prime]);
    }
    let z = phi_target.values(&t.next_obs, &taus_prime);
    let n_a = phi_target.n_actions();
    let a = match cfg.bootstrap {
        Bootstrap::Greedy => {
            let means: Vec<f64> = z.chunks(cfg.n_prime).map(|c| c.iter().sum::<f64>()).collect();
            argmax(&means)
        }
        Bootstrap::Policy => {
            let pi = policy.ok_or_else(|| Error::Config("policy bootstrap needs the policy network".into()))?;
            sample_categorical(rng, &softmax(&pi.forward(&t.next_obs).logits))
        }
    };
    debug_assert!(a < n_a);
    Ok(z[a * cfg.n_prime..(a + 1) * cfg.n_prime]
        .iter()
        .map(|&zj| t.reward + cfg.gamma * zj)
        .collect())
}

/// Quantile-Huber TD loss averaged over the batch.
pub fn iqn_loss(
    phi: &QuantileNet,
    phi_target: &QuantileNet,
    batch: &[Transition],
    cfg: &IqnLossConfig,
    policy: Option<&ActorCritic>,
    rng: &mut Rng,
) -> Result<f64> {
    loss_impl(phi, phi_target, batch, cfg, policy, rng, None)
}

/// [`iqn_loss`] together with its gradient with respect to `phi`.
pub fn iqn_loss_with_grad(
    phi: &QuantileNet,
    phi_target: &QuantileNet,
    batch: &[Transition],
    cfg: &IqnLossConfig,
    policy: Option<&ActorCritic>,
    rng: &mut Rng,
) -> Result<(f64, QuantileNet)> {
    let mut grad = phi.zeros_like();
    let loss = loss_impl(phi, phi_target, batch, cfg, policy, rng, Some(&mut grad))?;
    Ok((loss, grad))
}

fn loss_impl(
    phi: &QuantileNet,
    phi_target: &QuantileNet,
    batch: &[Transition],
    cfg: &IqnLossConfig,
    policy: Option<&ActorCritic>,
    rng: &mut Rng,
    mut grad: Option<&mut QuantileNet>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("IQN batch"));
    }
    cfg.validate()?;
    let inv_b = 1.0 / batch.len() as f64;
    let inv_np = 1.0 / cfg.n_prime as f64;
    let mut total = 0.0;
    for t in batch {
        if t.action >= phi.n_actions() {
            return Err(Error::InvalidAction {
                action: t.action,
                n_actions: phi.n_actions(),
            });
        }
        let taus: Vec<f64> = (0..cfg.n).map(|_| rng.gen::<f64>()).collect();
        let target = targets(phi_target, t, cfg, policy, rng)?;
        let (z, cache) = phi.forward_action(&t.obs, &taus, t.action);
        let mut g_z = vec![0.0; cfg.n];
        for (i, (&zi, &tau)) in z.iter().zip(&taus).enumerate() {
            for &yj in &target {
                let delta = yj - zi;
                total += inv_b * inv_np * quantile_huber(delta, tau, cfg.kappa);
                g_z[i] -= inv_b * inv_np * quantile_huber_grad(delta, tau, cfg.kappa);
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            phi.backward_action(&cache, t.action, &g_z, g);
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("IQN loss".into()));
    }
    Ok(total)
}
