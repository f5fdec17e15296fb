use crate::error::{Error, Result};

/// Generalized advantage estimates for one trajectory segment.
///
/// `dones[t]` marks that the step taken at `t` ended the episode, so neither
/// the bootstrap nor later advantages leak across it. `bootstrap_value` is
/// the critic's value of the observation after the last step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            what: "rewards vs values",
            a: n,
            b: values.len(),
        });
    }
    if dones.len() != n {
        return Err(Error::LengthMismatch {
            what: "rewards vs dones",
            a: n,
            b: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * keep - values[t];
        next_adv = delta + gamma * lam * keep * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// [`compute_gae`] over a time-major `[T x n_envs]` layout.
pub fn compute_gae_batch(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_values: &[f64],
    gamma: f64,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_envs = bootstrap_values.len();
    if n_envs == 0 || rewards.len() % n_envs != 0 {
        return Err(Error::LengthMismatch {
            what: "rollout length vs env count",
            a: rewards.len(),
            b: n_envs,
        });
    }
    let steps = rewards.len() / n_envs;
    let column = |xs: &[f64], i: usize| (0..steps).map(|t| xs[t * n_envs + i]).collect::<Vec<_>>();
    if values.len() != rewards.len() || dones.len() != rewards.len() {
        return Err(Error::LengthMismatch {
            what: "rollout arrays",
            a: rewards.len(),
            b: values.len().min(dones.len()),
        });
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut ret = vec![0.0; rewards.len()];
    for i in 0..n_envs {
        let d: Vec<bool> = (0..steps).map(|t| dones[t * n_envs + i]).collect();
        let (a, r) = compute_gae(&column(rewards, i), &column(values, i), &d, bootstrap_values[i], gamma, lam)?;
        for t in 0..steps {
            adv[t * n_envs + i] = a[t];
            ret[t * n_envs + i] = r[t];
        }
    }
    Ok((adv, ret))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, 0.5, -0.2];
        let v = [0.3, 0.1, 0.7];
        let d = [false, true, false];
        let (a, _) = compute_gae(&r, &v, &d, 2.0, 0.9, 0.0).unwrap();
        assert!((a[0] - (1.0 + 0.9 * 0.1 - 0.3)).abs() < 1e-15);
        assert!((a[1] - (0.5 - 0.1)).abs() < 1e-15);
        assert!((a[2] - (-0.2 + 0.9 * 2.0 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn lambda_one_telescopes() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let v = [0.5, -0.5, 0.25, 1.0];
        let (a, ret) = compute_gae(&r, &v, &[false; 4], 10.0, 0.9, 1.0).unwrap();
        for t in 0..4 {
            let mut g = 0.0;
            for (l, rl) in r[t..].iter().enumerate() {
                g += 0.9f64.powi(l as i32) * rl;
            }
            g += 0.9f64.powi((4 - t) as i32) * 10.0;
            assert!((a[t] - (g - v[t])).abs() < 1e-12);
            assert!((ret[t] - (a[t] + v[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0], &[], &[false], 0.0, 0.9, 0.9).is_err());
        assert!(compute_gae_batch(&[1.0; 3], &[0.0; 3], &[false; 3], &[0.0, 0.0], 0.9, 0.9).is_err());
    }

    #[test]
    fn batch_matches_per_env() {
        let r = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let v = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let d = [false, false, true, false, false, true];
        let (a, _) = compute_gae_batch(&r, &v, &d, &[7.0, 8.0], 0.9, 0.8).unwrap();
        let (a0, _) = compute_gae(&[1.0, 3.0, 5.0], &[0.1, 0.3, 0.5], &[false, true, false], 7.0, 0.9, 0.8).unwrap();
        let (a1, _) = compute_gae(&[2.0, 4.0, 6.0], &[0.2, 0.4, 0.6], &[false, false, true], 8.0, 0.9, 0.8).unwrap();
        assert_eq!(a, vec![a0[0], a1[0], a0[1], a1[1], a0[2], a1[2]]);
    }
}
