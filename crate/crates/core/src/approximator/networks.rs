use std::f64::consts::PI;

use crate::approximator::arch::{ArchConfig, FusionMethod};
use crate::approximator::nn::{dot, Activation, Dense, Mlp, MlpCache, ParamSet};
use crate::error::{Error, Result};
use crate::rng::Rng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Shared torso with a policy head (logits) and a scalar value head.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub torso: Mlp,
    pub policy_head: Dense,
    pub value_head: Dense,
}

#[derive(Debug, Clone)]
pub struct ActorCriticCache {
    pub torso: MlpCache,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl ActorCritic {
    pub fn new(arch: &ArchConfig, obs_dim: usize, n_actions: usize, rng: &mut Rng) -> Self {
        let torso = Mlp::new(obs_dim, &arch.torso_widths, arch.activation, SQRT_2, rng);
        let h = arch.feature_dim();
        Self {
            torso,
            policy_head: Dense::orthogonal(h, n_actions, 0.01, rng),
            value_head: Dense::orthogonal(h, 1, 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.torso.in_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.policy_head.out_dim
    }

    pub fn forward(&self, obs: &[f64]) -> ActorCriticCache {
        let torso = self.torso.forward(obs);
        let logits = self.policy_head.forward(torso.output());
        let value = self.value_head.forward_row(0, torso.output());
        ActorCriticCache { torso, logits, value }
    }

    pub fn backward(&self, cache: &ActorCriticCache, g_logits: &[f64], g_value: f64, grad: &mut ActorCritic) {
        let feat = cache.torso.output();
        let mut g_feat = vec![0.0; feat.len()];
        self.policy_head
            .backward(feat, g_logits, &mut grad.policy_head, Some(&mut g_feat));
        self.value_head
            .backward(feat, &[g_value], &mut grad.value_head, Some(&mut g_feat));
        self.torso.backward(&cache.torso, &g_feat, &mut grad.torso);
    }
}

impl ParamSet for ActorCritic {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.torso.tensors();
        t.extend(self.policy_head.tensors());
        t.extend(self.value_head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.torso.tensors_mut();
        t.extend(self.policy_head.tensors_mut());
        t.extend(self.value_head.tensors_mut());
        t
    }
}

/// Implicit quantile network: `Z_tau(s, .) = head(torso(s) * relu(embed(cos(pi i tau))))`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileNet {
    pub torso: Mlp,
    pub embed: Dense,
    pub head: Dense,
}

/// Per-sample activations for backpropagating through one action's quantiles.
#[derive(Debug, Clone)]
pub struct QuantileCache {
    pub torso: MlpCache,
    pub cos: Vec<Vec<f64>>,
    pub embed: Vec<Vec<f64>>,
}

impl QuantileNet {
    pub fn new(arch: &ArchConfig, obs_dim: usize, n_actions: usize, rng: &mut Rng) -> Self {
        let torso = Mlp::new(obs_dim, &arch.torso_widths, arch.activation, SQRT_2, rng);
        let h = arch.feature_dim();
        Self {
            torso,
            embed: Dense::orthogonal(arch.n_cos, h, SQRT_2, rng),
            head: Dense::orthogonal(h, n_actions, 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.torso.in_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.head.out_dim
    }

    pub fn n_cos(&self) -> usize {
        self.embed.in_dim
    }

    pub fn cos_features(&self, tau: f64) -> Vec<f64> {
        (0..self.n_cos()).map(|i| (PI * i as f64 * tau).cos()).collect()
    }

    /// Returns `(cos features, relu embedding)` for one quantile level.
    pub fn embed_tau(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.cos_features(tau);
        let mut e = self.embed.forward(&c);
        e.iter_mut().for_each(|x| *x = x.max(0.0));
        (c, e)
    }

    /// Quantile values for every action given precomputed embeddings,
    /// laid out `[action][tau]`.
    pub fn values_with_embeddings(&self, features: &[f64], embeddings: &[Vec<f64>]) -> Vec<f64> {
        let n_t = embeddings.len();
        let n_a = self.n_actions();
        let mut out = vec![0.0; n_a * n_t];
        let mut g = vec![0.0; features.len()];
        for (t, e) in embeddings.iter().enumerate() {
            for ((gk, &h), &ek) in g.iter_mut().zip(features).zip(e) {
                *gk = h * ek;
            }
            for a in 0..n_a {
                out[a * n_t + t] = self.head.forward_row(a, &g);
            }
        }
        out
    }

    /// Quantile values for every action, laid out `[action][tau]`.
    pub fn values(&self, obs: &[f64], taus: &[f64]) -> Vec<f64> {
        let torso = self.torso.forward(obs);
        let embeddings: Vec<Vec<f64>> = taus.iter().map(|&t| self.embed_tau(t).1).collect();
        self.values_with_embeddings(torso.output(), &embeddings)
    }

    /// Quantile values of a single action, with the cache for [`Self::backward_action`].
    pub fn forward_action(&self, obs: &[f64], taus: &[f64], action: usize) -> (Vec<f64>, QuantileCache) {
        let torso = self.torso.forward(obs);
        let feat = torso.output();
        let mut cos = Vec::with_capacity(taus.len());
        let mut embed = Vec::with_capacity(taus.len());
        let mut z = Vec::with_capacity(taus.len());
        let row = self.head.row(action);
        for &tau in taus {
            let (c, e) = self.embed_tau(tau);
            let mut acc = self.head.bias[action];
            for ((&w, &h), &ek) in row.iter().zip(feat).zip(&e) {
                acc += w * h * ek;
            }
            z.push(acc);
            cos.push(c);
            embed.push(e);
        }
        (z, QuantileCache { torso, cos, embed })
    }

    pub fn backward_action(&self, cache: &QuantileCache, action: usize, g_z: &[f64], grad: &mut QuantileNet) {
        let feat = cache.torso.output();
        let h = feat.len();
        let row = self.head.row(action);
        let mut g_feat = vec![0.0; h];
        let mut g_pre = vec![0.0; h];
        for (t, &gz) in g_z.iter().enumerate() {
            if gz == 0.0 {
                continue;
            }
            let e = &cache.embed[t];
            grad.head.bias[action] += gz;
            let gw = &mut grad.head.weight[action * h..(action + 1) * h];
            for k in 0..h {
                let gg = gz * row[k];
                gw[k] += gz * feat[k] * e[k];
                g_feat[k] += gg * e[k];
                g_pre[k] = if e[k] > 0.0 { gg * feat[k] } else { 0.0 };
            }
            self.embed.backward(&cache.cos[t], &g_pre, &mut grad.embed, None);
        }
        self.torso.backward(&cache.torso, &g_feat, &mut grad.torso);
    }
}

impl ParamSet for QuantileNet {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.torso.tensors();
        t.extend(self.embed.tensors());
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.torso.tensors_mut();
        t.extend(self.embed.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }
}

/// Distillation net `f_psi`: dense ReLU layer then a scalar output, preceded
/// by the fusion rule that builds its input from `(v, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillNet {
    pub method: FusionMethod,
    pub n_quantiles: usize,
    /// `N x h` interaction for [`FusionMethod::Bilinear`] (stored as a dense `N -> h` map).
    pub bilinear: Option<Dense>,
    pub hidden: Dense,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct FuseCache {
    v: f64,
    x: Vec<f64>,
    hidden: Vec<f64>,
    wq: Vec<f64>,
}

impl DistillNet {
    pub fn new(arch: &ArchConfig, rng: &mut Rng) -> Self {
        let (n, h) = (arch.n_quantiles, arch.distill_hidden);
        let bilinear = (arch.fusion == FusionMethod::Bilinear).then(|| Dense::orthogonal(n, h, 1.0, rng));
        let width = arch.fusion.input_width(n, h);
        Self {
            method: arch.fusion,
            n_quantiles: n,
            bilinear,
            hidden: Dense::orthogonal(width, h, SQRT_2, rng),
            out: Dense::orthogonal(h, 1, 1.0, rng),
        }
    }

    /// `f_psi` applied to an already-built input vector.
    pub fn head(&self, x: &[f64]) -> f64 {
        let mut hid = self.hidden.forward(x);
        hid.iter_mut().for_each(|z| *z = z.max(0.0));
        self.out.forward_row(0, &hid)
    }

    pub fn fuse_cached(&self, v: f64, q: &[f64]) -> Result<(f64, FuseCache)> {
        if q.len() != self.n_quantiles {
            return Err(Error::DimensionMismatch {
                what: "quantile vector",
                expected: self.n_quantiles,
                got: q.len(),
            });
        }
        let mean_q = q.iter().sum::<f64>() / q.len() as f64;
        let mut wq = Vec::new();
        let x = match self.method {
            FusionMethod::Hadamard => q.iter().map(|&qj| v * qj).collect(),
            FusionMethod::Concat => std::iter::once(v).chain(q.iter().copied()).collect(),
            FusionMethod::Average => vec![0.5 * (v + mean_q)],
            FusionMethod::WeightedDiff => vec![mean_q - v],
            FusionMethod::Bilinear => {
                let bl = self.bilinear.as_ref().expect("bilinear weights");
                wq = (0..bl.out_dim).map(|k| dot(bl.row(k), q)).collect();
                wq.iter().zip(&bl.bias).map(|(&w, &b)| v * w + b).collect()
            }
        };
        let mut hidden = self.hidden.forward(&x);
        hidden.iter_mut().for_each(|z| *z = z.max(0.0));
        let f = self.out.forward_row(0, &hidden);
        let fused = match self.method {
            FusionMethod::WeightedDiff => v + f,
            _ => f,
        };
        Ok((fused, FuseCache { v, x, hidden, wq }))
    }

    pub fn fuse(&self, v: f64, q: &[f64]) -> Result<f64> {
        self.fuse_cached(v, q).map(|(f, _)| f)
    }

    /// Accumulates `psi` gradients and returns `d fused / d v` times `g_out`.
    pub fn backward(&self, cache: &FuseCache, q: &[f64], g_out: f64, grad: &mut DistillNet) -> f64 {
        let mut g_hidden = vec![0.0; self.hidden.out_dim];
        self.out
            .backward(&cache.hidden, &[g_out], &mut grad.out, Some(&mut g_hidden));
        for (g, &y) in g_hidden.iter_mut().zip(&cache.hidden) {
            *g *= Activation::Relu.grad_from_output(y);
        }
        let mut g_x = vec![0.0; cache.x.len()];
        self.hidden.backward(&cache.x, &g_hidden, &mut grad.hidden, Some(&mut g_x));
        match self.method {
            FusionMethod::Hadamard => g_x.iter().zip(q).map(|(g, qj)| g * qj).sum(),
            FusionMethod::Concat => g_x[0],
            FusionMethod::Average => 0.5 * g_x[0],
            FusionMethod::WeightedDiff => g_out - g_x[0],
            FusionMethod::Bilinear => {
                let bl = grad.bilinear.as_mut().expect("bilinear grads");
                let n = self.n_quantiles;
                for (k, &gk) in g_x.iter().enumerate() {
                    bl.bias[k] += gk;
                    let gw = &mut bl.weight[k * n..(k + 1) * n];
                    for (w, &qj) in gw.iter_mut().zip(q) {
                        *w += gk * cache.v * qj;
                    }
                }
                g_x.iter().zip(&cache.wq).map(|(g, w)| g * w).sum()
            }
        }
    }
}

impl ParamSet for DistillNet {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        if let Some(bl) = &self.bilinear {
            t.extend(bl.tensors());
        }
        t.extend(self.hidden.tensors());
        t.extend(self.out.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        if let Some(bl) = &mut self.bilinear {
            t.extend(bl.tensors_mut());
        }
        t.extend(self.hidden.tensors_mut());
        t.extend(self.out.tensors_mut());
        t
    }
}
