//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

pub mod grad;

use pgrainbow::approximator::ParamSet;
use pgrainbow::env::{MdpSpec, TabularPolicy};
use pgrainbow::rng::{stream_rng, Rng, Stream};
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, Stream::Eval, 0xfeed)
}

/// Random policy with strictly positive, unevenly spread probabilities.
pub fn random_policy(spec: &MdpSpec, rng: &mut Rng) -> TabularPolicy {
    (0..spec.n_states)
        .map(|_| {
            let w: Vec<f64> = (0..spec.n_actions).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    spec: &MdpSpec,
    policy: &TabularPolicy,
    gamma: f64,
    s: usize,
    a: usize,
    steps_left: usize,
    g: f64,
    discount: f64,
    prob: f64,
    leaves: &mut Vec<(f64, f64)>,
) {
    for (next, &p) in spec.transition[s][a].iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for atom in &spec.reward[s][a] {
            if atom.prob == 0.0 {
                continue;
            }
            let g2 = g + discount * atom.value;
            let pr = prob * p * atom.prob;
            if spec.terminal[next] || steps_left == 1 {
                leaves.push((g2, pr));
                continue;
            }
            for (a2, &pa) in policy[next].iter().enumerate() {
                if pa > 0.0 {
                    enumerate(spec, policy, gamma, next, a2, steps_left - 1, g2, discount * gamma, pr * pa, leaves);
                }
            }
        }
    }
}

/// Return distribution of `(s, a)` by walking every trajectory forward.
/// Atoms are sorted and values closer than `1e-12` merged.
pub fn brute_force_distribution(spec: &MdpSpec, policy: &TabularPolicy, gamma: f64, s: usize, a: usize) -> Vec<(f64, f64)> {
    let mut leaves = Vec::new();
    if spec.terminal[s] {
        return vec![(0.0, 1.0)];
    }
    enumerate(spec, policy, gamma, s, a, spec.horizon, 0.0, 1.0, 1.0, &mut leaves);
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (v, p) in leaves {
        match merged.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-12 => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    merged
}

/// Exact transport cost between two small discrete distributions, by
/// enumerating every basic solution of the transportation LP.
pub fn transport_lp_w1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut choose = vec![0usize; k];
    fn next_combo(c: &mut [usize], n: usize) -> bool {
        let k = c.len();
        for i in (0..k).rev() {
            if c[i] < n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, c) in choose.iter_mut().enumerate() {
        *c = i;
    }
    loop {
        // Constraint matrix restricted to the chosen cells: m supply rows, n demand rows.
        let rows = m + n;
        let mut mat = vec![vec![0.0; k + 1]; rows];
        for (col, &ci) in choose.iter().enumerate() {
            let (i, j) = cells[ci];
            mat[i][col] = 1.0;
            mat[m + j][col] = 1.0;
        }
        for i in 0..m {
            mat[i][k] = a[i].1;
        }
        for j in 0..n {
            mat[m + j][k] = b[j].1;
        }
        if let Some(x) = solve_least(&mut mat, k) {
            if x.iter().all(|&v| v >= -1e-12) {
                let cost: f64 = choose
                    .iter()
                    .zip(&x)
                    .map(|(&ci, &f)| {
                        let (i, j) = cells[ci];
                        f * (a[i].0 - b[j].0).abs()
                    })
                    .sum();
                best = best.min(cost);
            }
        }
        if !next_combo(&mut choose, cells.len()) {
            break;
        }
    }
    best
}

/// Gauss-Jordan on an over-determined but consistent system; `None` when
/// the chosen columns are singular or the system is inconsistent.
fn solve_least(mat: &mut [Vec<f64>], k: usize) -> Option<Vec<f64>> {
    let rows = mat.len();
    let mut r = 0;
    let mut pivots = Vec::new();
    for col in 0..k {
        let p = (r..rows).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs()))?;
        if mat[p][col].abs() < 1e-12 {
            return None;
        }
        mat.swap(r, p);
        let pv = mat[r][col];
        for c in 0..=k {
            mat[r][c] /= pv;
        }
        for i in 0..rows {
            if i != r && mat[i][col] != 0.0 {
                let f = mat[i][col];
                for c in 0..=k {
                    mat[i][c] -= f * mat[r][c];
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    for row in mat.iter().skip(r) {
        if row[k].abs() > 1e-9 {
            return None;
        }
    }
    Some((0..k).map(|i| mat[i][k]).collect())
}

/// Direct double sum of discounted TD errors, stopping at episode ends.
pub fn gae_double_sum(rewards: &[f64], values: &[f64], dones: &[bool], boot: f64, gamma: f64, lam: f64) -> Vec<f64> {
    let n = rewards.len();
    let v_next = |t: usize| if t + 1 < n { values[t + 1] } else { boot };
    let delta = |t: usize| rewards[t] + gamma * v_next(t) * if dones[t] { 0.0 } else { 1.0 } - values[t];
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut w = 1.0;
            for l in t..n {
                total += w * delta(l);
                if dones[l] {
                    break;
                }
                w *= gamma * lam;
            }
            total
        })
        .collect()
}

/// `|fd - analytic| / max(|fd|, |analytic|)` over whole gradient vectors.
pub fn rel_error(fd: &[f64], analytic: &[f64]) -> f64 {
    let diff: f64 = fd.iter().zip(analytic).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` over the flattened parameters of `params`.
pub fn fd_gradient<P: ParamSet + Clone>(params: &P, h: f64, mut f: impl FnMut(&P) -> f64) -> Vec<f64> {
    let base = params.flat();
    let mut probe = params.clone();
    let mut x = base.clone();
    (0..base.len())
        .map(|k| {
            x[k] = base[k] + h;
            probe.set_flat(&x);
            let up = f(&probe);
            x[k] = base[k] - h;
            probe.set_flat(&x);
            let down = f(&probe);
            x[k] = base[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a plain vector function.
pub fn fd_vec(x0: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    (0..x0.len())
        .map(|k| {
            x[k] = x0[k] + h;
            let up = f(&x);
            x[k] = x0[k] - h;
            let down = f(&x);
            x[k] = x0[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// The agent's action probabilities in every state, as a table.
pub fn agent_policy(agent: &pgrainbow::Agent, spec: &MdpSpec) -> TabularPolicy {
    (0..spec.n_states)
        .map(|s| agent.action_probs(&pgrainbow::Observation::one_hot(spec.n_states, s), 0.0))
        .collect()
}

/// Built-in specs truncated to a horizon small enough to enumerate.
pub fn enumerable_suite() -> Vec<MdpSpec> {
    pgrainbow::env::builtin_suite()
        .into_iter()
        .map(|spec| {
            let h = if spec.name == pgrainbow::env::suite::SLIP_GRID { 4 } else { 6 };
            let h = h.min(spec.horizon);
            spec.with_horizon(h)
        })
        .collect()
}

/// Largest atom-wise discrepancy, or `None` when the supports differ in size.
pub fn atom_mismatch(oracle: &pgrainbow::DiscreteReturnDistribution, brute: &[(f64, f64)]) -> Option<f64> {
    if oracle.len() != brute.len() {
        return None;
    }
    Some(
        oracle
            .atoms()
            .zip(brute)
            .map(|((v, p), &(bv, bp))| (v - bv).abs().max((p - bp).abs()))
            .fold(0.0, f64::max),
    )
}

/// A random segment of length `1..=64` with sparse episode ends.
pub fn random_segment(rng: &mut Rng) -> (Vec<f64>, Vec<f64>, Vec<bool>, f64, f64, f64) {
    let n = rng.gen_range(1..=64);
    let rewards = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let values = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let dones = (0..n).map(|_| rng.gen_bool(0.1)).collect();
    (rewards, values, dones, rng.gen_range(-2.0..2.0), rng.gen_range(0.8..1.0), rng.gen_range(0.0..=1.0))
}

/// Worst gap between the recursion and the double sum over `cases` segments,
/// plus the worst gap when everything after a random episode end is
/// rewritten (which must not touch advantages up to that end).
pub fn gae_discrepancies(cases: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng(seed);
    let (mut worst, mut worst_boundary) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let (r, v, d, boot, gamma, lam) = random_segment(&mut rng);
        let (adv, ret) = pgrainbow::rollout::compute_gae(&r, &v, &d, boot, gamma, lam).unwrap();
        let brute = gae_double_sum(&r, &v, &d, boot, gamma, lam);
        for t in 0..r.len() {
            worst = worst.max((adv[t] - brute[t]).abs()).max((ret[t] - brute[t] - v[t]).abs());
        }
        let n = r.len();
        let cut = rng.gen_range(0..n);
        let (mut r2, mut v2, mut d2) = (r.clone(), v.clone(), d.clone());
        d2[cut] = true;
        let (base, _) = pgrainbow::rollout::compute_gae(&r2, &v2, &d2, boot, gamma, lam).unwrap();
        for t in cut + 1..n {
            r2[t] = rng.gen_range(-5.0..5.0);
            v2[t] = rng.gen_range(-5.0..5.0);
            d2[t] = rng.gen_bool(0.5);
        }
        let (perturbed, _) = pgrainbow::rollout::compute_gae(&r2, &v2, &d2, rng.gen_range(-5.0..5.0), gamma, lam).unwrap();
        for t in 0..=cut {
            worst_boundary = worst_boundary.max((base[t] - perturbed[t]).abs());
        }
    }
    (worst, worst_boundary)
}

/// Small training config shared by the trainer-level tests.
pub fn small_config(agent: pgrainbow::AgentKind, env: &str, total: u64, seed: u64) -> pgrainbow::TrainConfig {
    pgrainbow::TrainConfig {
        agent,
        env: env.to_string(),
        total_timesteps: total,
        seed,
        ..pgrainbow::TrainConfig::default()
    }
}

/// Steps a PPO trainer and a PG-Rainbow trainer in lockstep and returns,
/// for every iteration, whether their `theta` parameters are bit-identical.
pub fn theta_lockstep(mut rainbow: pgrainbow::TrainConfig) -> Vec<bool> {
    let mut ppo_cfg = rainbow.clone();
    ppo_cfg.agent = pgrainbow::AgentKind::Ppo;
    rainbow.agent = pgrainbow::AgentKind::PgRainbow;
    let mut ppo = pgrainbow::Trainer::new(ppo_cfg).unwrap();
    let mut pgr = pgrainbow::Trainer::new(rainbow).unwrap();
    let mut same = Vec::new();
    while !ppo.is_done() {
        ppo.run_iteration().unwrap();
        pgr.run_iteration().unwrap();
        let a: Vec<u64> = ppo.agent.params.theta.flat().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = pgr.agent.params.theta.flat().iter().map(|x| x.to_bits()).collect();
        same.push(a == b);
    }
    same
}
