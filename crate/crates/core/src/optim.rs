//! Adam and global gradient-norm clipping over [`ParamSet`]s.

use serde::{Deserialize, Serialize};

use crate::approximator::nn::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new<P: ParamSet>(params: &P, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            cfg,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<P: ParamSet>(&mut self, params: &mut P, grad: &P, lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let step = lr / bc1;
        let bc2_sqrt = bc2.sqrt();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= step * m[i] / (v[i].sqrt() / bc2_sqrt + eps);
            }
        }
    }
}

/// Scales every gradient so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut dyn ParamSetDyn], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sq_norm_dyn()).sum::<f64>().sqrt();
    let coef = max_norm / (norm + 1e-6);
    if coef < 1.0 {
        grads.iter_mut().for_each(|g| g.scale_dyn(coef));
    }
    norm
}

/// Object-safe slice of [`ParamSet`] used by [`clip_grad_norm`].
pub trait ParamSetDyn {
    fn sq_norm_dyn(&self) -> f64;
    fn scale_dyn(&mut self, k: f64);
}

impl<P: ParamSet> ParamSetDyn for P {
    fn sq_norm_dyn(&self) -> f64 {
        self.sq_norm()
    }

    fn scale_dyn(&mut self, k: f64) {
        self.scale(k)
    }
}
