//! Finite-difference gradient checks on random small instances. Each check
//! returns the relative error of every instance.

use super::{fd_gradient, fd_vec, rel_error, rng};
use pgrainbow::approximator::{ActorCritic, DistillNet, ParamSet, QuantileNet};
use pgrainbow::losses::*;
use pgrainbow::rng::Rng;
use pgrainbow::rollout::Transition;
use pgrainbow::{ArchConfig, FusionMethod, Observation};
use rand::Rng as _;

pub const INSTANCES: usize = 20;
pub const H: f64 = 1e-6;

fn uniform(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn randomize<P: ParamSet>(p: &mut P, rng: &mut Rng, scale: f64) {
    let x = uniform(rng, p.flat().len(), -scale, scale);
    p.set_flat(&x);
}

fn arch(fusion: FusionMethod) -> ArchConfig {
    ArchConfig {
        torso_widths: vec![5, 4],
        n_cos: 4,
        n_quantiles: 4,
        fusion,
        distill_hidden: 5,
        ..ArchConfig::default()
    }
}

pub fn huber_checks() -> Vec<f64> {
    let mut rng = rng(100);
    (0..INSTANCES)
        .map(|_| {
            let kappa = rng.gen_range(0.2..2.0);
            let tau = rng.gen_range(0.01..0.99);
            let d = uniform(&mut rng, 8, -3.0, 3.0);
            let an: Vec<f64> = d
                .iter()
                .map(|&x| huber_grad(x, kappa))
                .chain(d.iter().map(|&x| quantile_huber_grad(x, tau, kappa)))
                .collect();
            let fd: Vec<f64> = d
                .iter()
                .map(|&x| (huber(x + H, kappa) - huber(x - H, kappa)) / (2.0 * H))
                .chain(
                    d.iter()
                        .map(|&x| (quantile_huber(x + H, tau, kappa) - quantile_huber(x - H, tau, kappa)) / (2.0 * H)),
                )
                .collect();
            rel_error(&fd, &an)
        })
        .collect()
}

pub fn clip_loss_checks() -> Vec<f64> {
    let mut rng = rng(101);
    (0..INSTANCES)
        .map(|_| {
            let n = rng.gen_range(2..10);
            let old = uniform(&mut rng, n, -2.0, -0.1);
            let new: Vec<f64> = old.iter().map(|o| o + rng.gen_range(-0.4..0.4)).collect();
            let adv = uniform(&mut rng, n, -2.0, 2.0);
            let eps = rng.gen_range(0.05..0.3);
            let an = ppo_clip_loss_with_grad(&new, &old, &adv, eps).unwrap().grad;
            let fd = fd_vec(&new, H, |x| ppo_clip_loss(x, &old, &adv, eps).unwrap());
            rel_error(&fd, &an)
        })
        .collect()
}

pub fn value_loss_checks() -> Vec<f64> {
    let mut rng = rng(102);
    (0..INSTANCES)
        .map(|i| {
            let n = rng.gen_range(2..10);
            let v = uniform(&mut rng, n, -2.0, 2.0);
            let old: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-0.5..0.5)).collect();
            let ret = uniform(&mut rng, n, -2.0, 2.0);
            let use_clip = i % 2 == 0;
            let (_, an) = value_loss_with_grad(&v, &old, &ret, 0.2, use_clip).unwrap();
            let fd = fd_vec(&v, H, |x| value_loss(x, &old, &ret, 0.2, use_clip).unwrap());
            rel_error(&fd, &an)
        })
        .collect()
}

pub fn entropy_checks() -> Vec<f64> {
    let mut rng = rng(103);
    (0..INSTANCES)
        .map(|_| {
            let (rows, k) = (rng.gen_range(1..5), rng.gen_range(2..6));
            let flat = uniform(&mut rng, rows * k, -3.0, 3.0);
            let shape = |x: &[f64]| x.chunks(k).map(<[f64]>::to_vec).collect::<Vec<_>>();
            let (_, g) = entropy_with_grad(&shape(&flat));
            let an: Vec<f64> = g.concat();
            let fd = fd_vec(&flat, H, |x| entropy_bonus(&shape(x)));
            rel_error(&fd, &an)
        })
        .collect()
}

/// `(label, critic path, fusion)` combinations covered by the PPO check.
pub fn ppo_paths() -> Vec<(String, CriticPath, FusionMethod)> {
    let mut v = vec![
        ("theta".to_string(), CriticPath::Theta, FusionMethod::Hadamard),
        ("disjoint".to_string(), CriticPath::Disjoint, FusionMethod::Hadamard),
    ];
    for f in FusionMethod::ALL {
        v.push((format!("fused-{}", f.as_str()), CriticPath::Fused, f));
    }
    v
}

/// Relative errors for `theta` and `psi` separately.
pub fn ppo_objective_checks(path: CriticPath, fusion: FusionMethod) -> Vec<(f64, f64)> {
    let mut rng = rng(104 + fusion as u64);
    let (obs_dim, n_actions, nq) = (3, 3, 4);
    let arch = arch(fusion);
    (0..INSTANCES)
        .map(|i| {
            let mut theta = ActorCritic::new(&arch, obs_dim, n_actions, &mut rng);
            let mut psi = DistillNet::new(&arch, &mut rng);
            randomize(&mut theta, &mut rng, 0.8);
            randomize(&mut psi, &mut rng, 0.8);
            let n = rng.gen_range(3..8);
            let obs: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut rng, obs_dim, -1.0, 1.0)).collect();
            let quantiles: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut q = uniform(&mut rng, nq, -2.0, 2.0);
                    q.sort_by(f64::total_cmp);
                    q
                })
                .collect();
            let samples: Vec<PpoSample<'_>> = (0..n)
                .map(|b| {
                    let c = theta.forward(&obs[b]);
                    let action = rng.gen_range(0..n_actions);
                    let lp = pgrainbow::approximator::nn::log_softmax(&c.logits)[action];
                    PpoSample {
                        obs: &obs[b],
                        action,
                        old_logprob: lp + rng.gen_range(-0.3..0.3),
                        advantage: rng.gen_range(-2.0..2.0),
                        ret: rng.gen_range(-2.0..2.0),
                        old_value: c.value + rng.gen_range(-0.4..0.4),
                        quantiles: Some(&quantiles[b]),
                    }
                })
                .collect();
            let coefs = PpoCoefs {
                clip_coef: 0.2,
                clip_vloss: i % 2 == 0,
                vf_coef: 0.5,
                ent_coef: 0.05,
                norm_adv: i % 3 != 0,
            };
            let (_, grads) = ppo_objective(&theta, &psi, &samples, path, &coefs).unwrap();
            let loss = |t: &ActorCritic, p: &DistillNet| ppo_objective(t, p, &samples, path, &coefs).unwrap().0.total;
            let fd_theta = fd_gradient(&theta, H, |t| loss(t, &psi));
            let fd_psi = fd_gradient(&psi, H, |p| loss(&theta, p));
            (
                rel_error(&fd_theta, &grads.theta.flat()),
                rel_error(&fd_psi, &grads.psi.flat()),
            )
        })
        .collect()
}

pub fn iqn_checks(bootstrap: Bootstrap) -> Vec<f64> {
    let mut rng = rng(120 + bootstrap as u64);
    let (obs_dim, n_actions) = (3, 2);
    let arch = arch(FusionMethod::Hadamard);
    (0..INSTANCES)
        .map(|_| {
            let mut phi = QuantileNet::new(&arch, obs_dim, n_actions, &mut rng);
            let mut target = phi.clone();
            let mut policy = ActorCritic::new(&arch, obs_dim, n_actions, &mut rng);
            randomize(&mut phi, &mut rng, 0.8);
            randomize(&mut target, &mut rng, 0.8);
            randomize(&mut policy, &mut rng, 0.8);
            let batch: Vec<Transition> = (0..rng.gen_range(1..6))
                .map(|_| Transition {
                    obs: Observation::from_vec(uniform(&mut rng, obs_dim, -1.0, 1.0)),
                    action: rng.gen_range(0..n_actions),
                    reward: rng.gen_range(-1.0..1.0),
                    next_obs: Observation::from_vec(uniform(&mut rng, obs_dim, -1.0, 1.0)),
                    done: rng.gen_bool(0.3),
                })
                .collect();
            let cfg = IqnLossConfig {
                n: rng.gen_range(1..5),
                n_prime: rng.gen_range(1..5),
                kappa: rng.gen_range(0.3..1.5),
                gamma: 0.9,
                bootstrap,
            };
            let draws = rng.clone();
            let (_, grad) = iqn_loss_with_grad(&phi, &target, &batch, &cfg, Some(&policy), &mut draws.clone()).unwrap();
            let fd = fd_gradient(&phi, H, |p| {
                iqn_loss(p, &target, &batch, &cfg, Some(&policy), &mut draws.clone()).unwrap()
            });
            rng.gen::<u64>();
            rel_error(&fd, &grad.flat())
        })
        .collect()
}
