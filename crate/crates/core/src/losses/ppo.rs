use serde::{Deserialize, Serialize};

use crate::approximator::networks::{ActorCritic, DistillNet};
use crate::approximator::nn::{log_softmax, ParamSet};
use crate::error::{Error, Result};

/// Loss components of one PPO minibatch (or their average over an update).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoLossParts {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `policy_loss + vf_coef * value_loss - ent_coef * entropy`.
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_len(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, a, b })
    }
}

/// Clipped surrogate loss and diagnostics.
#[derive(Debug, Clone)]
pub struct ClipLossOutput {
    pub loss: f64,
    /// `d loss / d new_logprobs`.
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// `-mean(min(r A, clip(r, 1 - eps, 1 + eps) A))` with `r = exp(new - old)`.
pub fn ppo_clip_loss(new_logprobs: &[f64], old_logprobs: &[f64], advantages: &[f64], epsilon: f64) -> Result<f64> {
    ppo_clip_loss_with_grad(new_logprobs, old_logprobs, advantages, epsilon).map(|o| o.loss)
}

pub fn ppo_clip_loss_with_grad(
    new_logprobs: &[f64],
    old_logprobs: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<ClipLossOutput> {
    check_len("new vs old logprobs", new_logprobs.len(), old_logprobs.len())?;
    check_len("logprobs vs advantages", new_logprobs.len(), advantages.len())?;
    check_finite("new logprobs", new_logprobs)?;
    check_finite("old logprobs", old_logprobs)?;
    check_finite("advantages", advantages)?;
    let n = new_logprobs.len();
    if n == 0 {
        return Err(Error::Empty("policy loss batch"));
    }
    let inv = 1.0 / n as f64;
    let mut out = ClipLossOutput {
        loss: 0.0,
        grad: vec![0.0; n],
        clip_fraction: 0.0,
        approx_kl: 0.0,
    };
    for i in 0..n {
        let log_ratio = new_logprobs[i] - old_logprobs[i];
        let r = log_ratio.exp();
        let a = advantages[i];
        let unclipped = r * a;
        let clipped = r.clamp(1.0 - epsilon, 1.0 + epsilon) * a;
        if unclipped <= clipped {
            out.loss -= inv * unclipped;
            out.grad[i] = -inv * unclipped;
        } else {
            out.loss -= inv * clipped;
        }
        if (r - 1.0).abs() > epsilon {
            out.clip_fraction += inv;
        }
        out.approx_kl += inv * ((r - 1.0) - log_ratio);
    }
    Ok(out)
}

/// Value loss; with `use_clip` the prediction may not move more than
/// `clip_coef` from `v_old` without being charged the larger error.
pub fn value_loss(v_pred: &[f64], v_old: &[f64], returns: &[f64], clip_coef: f64, use_clip: bool) -> Result<f64> {
    value_loss_with_grad(v_pred, v_old, returns, clip_coef, use_clip).map(|(l, _)| l)
}

pub fn value_loss_with_grad(
    v_pred: &[f64],
    v_old: &[f64],
    returns: &[f64],
    clip_coef: f64,
    use_clip: bool,
) -> Result<(f64, Vec<f64>)> {
    check_len("v_pred vs v_old", v_pred.len(), v_old.len())?;
    check_len("v_pred vs returns", v_pred.len(), returns.len())?;
    check_finite("predicted values", v_pred)?;
    check_finite("old values", v_old)?;
    check_finite("returns", returns)?;
    let n = v_pred.len();
    if n == 0 {
        return Err(Error::Empty("value loss batch"));
    }
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let err = v_pred[i] - returns[i];
        if !use_clip {
            loss += 0.5 * inv * err * err;
            grad[i] = inv * err;
            continue;
        }
        let diff = v_pred[i] - v_old[i];
        let v_clip = v_old[i] + diff.clamp(-clip_coef, clip_coef);
        let err_clip = v_clip - returns[i];
        if err * err >= err_clip * err_clip {
            loss += 0.5 * inv * err * err;
            grad[i] = inv * err;
        } else {
            loss += 0.5 * inv * err_clip * err_clip;
            grad[i] = if diff.abs() < clip_coef { inv * err_clip } else { 0.0 };
        }
    }
    Ok((loss, grad))
}

/// Mean categorical entropy of `softmax(logits)` over the rows.
pub fn entropy_bonus(logits: &[Vec<f64>]) -> f64 {
    entropy_with_grad(logits).0
}

/// Mean entropy and its gradient with respect to each row of logits.
pub fn entropy_with_grad(logits: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    if logits.is_empty() {
        return (0.0, Vec::new());
    }
    let inv = 1.0 / logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .map(|row| {
            let lp = log_softmax(row);
            let h: f64 = -lp.iter().map(|&l| if l.is_finite() { l.exp() * l } else { 0.0 }).sum::<f64>();
            total += inv * h;
            lp.iter()
                .map(|&l| {
                    let p = l.exp();
                    if p == 0.0 {
                        0.0
                    } else {
                        -inv * p * (l + h)
                    }
                })
                .collect()
        })
        .collect();
    (total, grads)
}

/// Mean zero, unit (sample) standard deviation; `1e-8` guards the divisor.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Which value estimate the PPO value loss trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticPath {
    /// `V_theta(s)` straight from the value head.
    Theta,
    /// `V_psi(s)`: the distillation net over `V_theta` and the quantile vector.
    Fused,
    /// IQN state value `mean_j q_j(s)`; receives no PPO gradient.
    Disjoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoCoefs {
    pub clip_coef: f64,
    pub clip_vloss: bool,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub norm_adv: bool,
}

/// One training sample for the PPO objective.
#[derive(Debug, Clone, Copy)]
pub struct PpoSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub old_logprob: f64,
    pub advantage: f64,
    pub ret: f64,
    pub old_value: f64,
    /// State quantile vector `q_j = sum_a pi(a|s) Z(s, a, tau_j)` at the
    /// midpoint levels; required unless the critic path is [`CriticPath::Theta`].
    pub quantiles: Option<&'a [f64]>,
}

/// Gradients of the PPO objective.
#[derive(Debug, Clone)]
pub struct PpoGrads {
    pub theta: ActorCritic,
    pub psi: DistillNet,
}

/// Full PPO objective on a minibatch with gradients for `theta` and `psi`.
///
/// The quantile vectors are inputs, so neither `phi` nor the policy receives
/// gradient through them.
pub fn ppo_objective(
    theta: &ActorCritic,
    psi: &DistillNet,
    samples: &[PpoSample<'_>],
    critic: CriticPath,
    coefs: &PpoCoefs,
) -> Result<(PpoLossParts, PpoGrads)> {
    if samples.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let mut caches = Vec::with_capacity(samples.len());
    let mut fuse_caches = Vec::with_capacity(samples.len());
    let mut new_lp = Vec::with_capacity(samples.len());
    let mut v_pred = Vec::with_capacity(samples.len());
    let mut probs = Vec::with_capacity(samples.len());
    for s in samples {
        let c = theta.forward(s.obs);
        let lp = log_softmax(&c.logits);
        new_lp.push(lp[s.action]);
        let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let v = match critic {
            CriticPath::Theta => c.value,
            CriticPath::Fused | CriticPath::Disjoint => {
                let q = s
                    .quantiles
                    .ok_or_else(|| Error::Config("quantile vector missing for a quantile critic".into()))?;
                if critic == CriticPath::Fused {
                    let (v, fc) = psi.fuse_cached(c.value, q)?;
                    fuse_caches.push(fc);
                    v
                } else if q.is_empty() {
                    return Err(Error::Empty("quantile vector"));
                } else {
                    q.iter().sum::<f64>() / q.len() as f64
                }
            }
        };
        v_pred.push(v);
        probs.push(p);
        caches.push(c);
    }
    let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    if coefs.norm_adv {
        adv = normalize_advantages(&adv);
    }
    let old_lp: Vec<f64> = samples.iter().map(|s| s.old_logprob).collect();
    let old_v: Vec<f64> = samples.iter().map(|s| s.old_value).collect();
    let rets: Vec<f64> = samples.iter().map(|s| s.ret).collect();

    let clip = ppo_clip_loss_with_grad(&new_lp, &old_lp, &adv, coefs.clip_coef)?;
    let (v_loss, g_v) = value_loss_with_grad(&v_pred, &old_v, &rets, coefs.clip_coef, coefs.clip_vloss)?;
    let logits: Vec<Vec<f64>> = caches.iter().map(|c| c.logits.clone()).collect();
    let (entropy, g_ent) = entropy_with_grad(&logits);
    let parts = PpoLossParts {
        policy_loss: clip.loss,
        value_loss: v_loss,
        entropy,
        total: clip.loss + coefs.vf_coef * v_loss - coefs.ent_coef * entropy,
        clip_fraction: clip.clip_fraction,
        approx_kl: clip.approx_kl,
    };
    if !parts.total.is_finite() {
        return Err(Error::NonFinite("PPO loss".into()));
    }

    let mut grads = PpoGrads {
        theta: theta.zeros_like(),
        psi: psi.zeros_like(),
    };
    for (i, s) in samples.iter().enumerate() {
        let g_lp = clip.grad[i];
        let g_logits: Vec<f64> = probs[i]
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let onehot = if k == s.action { 1.0 } else { 0.0 };
                g_lp * (onehot - p) - coefs.ent_coef * g_ent[i][k]
            })
            .collect();
        let g_pred = coefs.vf_coef * g_v[i];
        let g_value = match critic {
            CriticPath::Theta => g_pred,
            CriticPath::Fused => {
                let q = s.quantiles.unwrap_or_default();
                psi.backward(&fuse_caches[i], q, g_pred, &mut grads.psi)
            }
            CriticPath::Disjoint => 0.0,
        };
        theta.backward(&caches[i], &g_logits, g_value, &mut grads.theta);
    }
    Ok((parts, grads))
}
