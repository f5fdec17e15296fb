use crate::approximator::arch::{ArchConfig, FusionMethod};
use crate::approximator::networks::{ActorCritic, DistillNet, QuantileNet};
use crate::approximator::nn::{softmax, ParamSet};
use crate::env::distribution::midpoint_taus;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// The four parameter groups of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    /// Actor-critic torso with policy and value heads.
    pub theta: ActorCritic,
    /// Online quantile network.
    pub phi: QuantileNet,
    /// Bootstrap copy of `phi`, changed only by [`AgentParams::sync_target`].
    pub phi_target: QuantileNet,
    /// Distillation network.
    pub psi: DistillNet,
}

impl AgentParams {
    pub fn sync_target(&mut self) {
        self.phi_target = self.phi.clone();
    }

    pub fn all_finite(&self) -> bool {
        self.theta.all_finite() && self.phi.all_finite() && self.phi_target.all_finite() && self.psi.all_finite()
    }

    pub fn obs_dim(&self) -> usize {
        self.theta.obs_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.theta.n_actions()
    }
}

/// Orthogonal init: gain sqrt(2) for hidden layers, 0.01 for the policy
/// head, 1.0 for value and quantile heads. Each group has its own seed
/// stream, so `theta` does not depend on the other groups' shapes.
pub fn init_params(seed: u64, arch: &ArchConfig, obs_dim: usize, n_actions: usize) -> Result<AgentParams> {
    arch.validate()?;
    if obs_dim == 0 || n_actions == 0 {
        return Err(Error::Config("obs_dim and n_actions must be >= 1".into()));
    }
    let theta = ActorCritic::new(arch, obs_dim, n_actions, &mut stream_rng(seed, Stream::InitTheta, 0));
    let phi = QuantileNet::new(arch, obs_dim, n_actions, &mut stream_rng(seed, Stream::InitPhi, 0));
    let psi = DistillNet::new(arch, &mut stream_rng(seed, Stream::InitPsi, 0));
    Ok(AgentParams {
        phi_target: phi.clone(),
        theta,
        phi,
        psi,
    })
}

/// Quantile values for a batch, `values[b][a][t]` flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSample {
    pub taus: Vec<f64>,
    pub batch: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QuantileSample {
    pub fn get(&self, b: usize, a: usize, t: usize) -> f64 {
        let n_t = self.taus.len();
        self.values[(b * self.n_actions + a) * n_t + t]
    }

    /// The `[action][tau]` block of batch row `b`.
    pub fn row(&self, b: usize) -> &[f64] {
        let block = self.n_actions * self.taus.len();
        &self.values[b * block..(b + 1) * block]
    }
}

fn check_obs<O: AsRef<[f64]>>(obs_batch: &[O], dim: usize) -> Result<()> {
    for o in obs_batch {
        if o.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                what: "observation",
                expected: dim,
                got: o.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Policy logits and critic values `V_theta(s)` for a batch.
pub fn policy_value_forward<O: AsRef<[f64]>>(theta: &ActorCritic, obs_batch: &[O]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    check_obs(obs_batch, theta.obs_dim())?;
    Ok(obs_batch
        .iter()
        .map(|o| {
            let c = theta.forward(o.as_ref());
            (c.logits, c.value)
        })
        .unzip())
}

pub fn quantile_forward<O: AsRef<[f64]>>(phi: &QuantileNet, obs_batch: &[O], taus: &[f64]) -> Result<QuantileSample> {
    check_obs(obs_batch, phi.obs_dim())?;
    if let Some(&bad) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidTau(bad));
    }
    let embeddings: Vec<Vec<f64>> = taus.iter().map(|&t| phi.embed_tau(t).1).collect();
    let mut values = Vec::with_capacity(obs_batch.len() * phi.n_actions() * taus.len());
    for o in obs_batch {
        let feat = phi.torso.forward(o.as_ref());
        values.extend(phi.values_with_embeddings(feat.output(), &embeddings));
    }
    Ok(QuantileSample {
        taus: taus.to_vec(),
        batch: obs_batch.len(),
        n_actions: phi.n_actions(),
        values,
    })
}

/// `q_j = sum_a probs[a] * z[a][j]` for an `[action][tau]` block.
pub fn mix_quantiles(probs: &[f64], z: &[f64], n_taus: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_taus];
    for (a, &p) in probs.iter().enumerate() {
        for (qj, &zj) in q.iter_mut().zip(&z[a * n_taus..(a + 1) * n_taus]) {
            *qj += p * zj;
        }
    }
    q
}

/// Policy-weighted quantile vector at the midpoint levels `(2j - 1) / (2N)`.
///
/// Both factors are treated as constants by the training code: no gradient
/// reaches `phi` or the policy through this value.
pub fn state_quantile_vector<O: AsRef<[f64]>>(
    phi: &QuantileNet,
    theta: &ActorCritic,
    obs_batch: &[O],
    n_quantiles: usize,
) -> Result<Vec<Vec<f64>>> {
    let taus = midpoint_taus(n_quantiles);
    let z = quantile_forward(phi, obs_batch, &taus)?;
    let (logits, _) = policy_value_forward(theta, obs_batch)?;
    Ok(logits
        .iter()
        .enumerate()
        .map(|(b, l)| mix_quantiles(&softmax(l), z.row(b), n_quantiles))
        .collect())
}

/// Fused critic values for a batch.
pub fn fuse(psi: &DistillNet, v: &[f64], q: &[Vec<f64>], method: FusionMethod) -> Result<Vec<f64>> {
    if method != psi.method {
        return Err(Error::Config(format!(
            "distillation net was built for {}, not {method}",
            psi.method
        )));
    }
    if v.len() != q.len() {
        return Err(Error::LengthMismatch {
            what: "critic values vs quantile rows",
            a: v.len(),
            b: q.len(),
        });
    }
    v.iter().zip(q).map(|(&vi, qi)| psi.fuse(vi, qi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::nn::ParamSet;
    use crate::env::vec_env::Observation;

    fn small_arch(fusion: FusionMethod) -> ArchConfig {
        ArchConfig {
            torso_widths: vec![8, 8],
            n_cos: 8,
            n_quantiles: 4,
            fusion,
            distill_hidden: 6,
            ..ArchConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(5, &ArchConfig::default(), 7, 2).unwrap();
        let b = init_params(5, &ArchConfig::default(), 7, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phi, a.phi_target);
        let c = init_params(6, &ArchConfig::default(), 7, 2).unwrap();
        assert_ne!(a.theta, c.theta);
    }

    #[test]
    fn theta_init_independent_of_other_groups() {
        let a = init_params(5, &small_arch(FusionMethod::Hadamard), 5, 3).unwrap();
        let b = init_params(5, &small_arch(FusionMethod::Bilinear), 5, 3).unwrap();
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn initial_policy_is_near_uniform() {
        let p = init_params(1, &ArchConfig::default(), 26, 4).unwrap();
        for s in 0..26 {
            let obs = Observation::one_hot(26, s);
            let c = p.theta.forward(&obs);
            assert!(c.logits.iter().all(|l| l.abs() < 0.1), "{:?}", c.logits);
        }
    }

    #[test]
    fn zero_heads_give_uniform_policy_and_bias_value() {
        let mut p = init_params(2, &small_arch(FusionMethod::Hadamard), 5, 3).unwrap();
        p.theta.policy_head = p.theta.policy_head.zeros_like();
        p.theta.value_head = p.theta.value_head.zeros_like();
        p.theta.value_head.bias[0] = 0.7;
        let obs = vec![Observation::one_hot(5, 1), Observation::one_hot(5, 4)];
        let (logits, v) = policy_value_forward(&p.theta, &obs).unwrap();
        for l in &logits {
            let pr = softmax(l);
            assert!(pr.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
        assert_eq!(v, vec![0.7, 0.7]);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let p = init_params(2, &small_arch(FusionMethod::Hadamard), 5, 3).unwrap();
        let obs = vec![vec![0.0; 4]];
        assert!(matches!(
            policy_value_forward(&p.theta, &obs),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(quantile_forward(&p.phi, &obs, &[0.5]).is_err());
        let obs = vec![vec![0.0; 5]];
        assert!(matches!(quantile_forward(&p.phi, &obs, &[1.5]), Err(Error::InvalidTau(_))));
    }

    #[test]
    fn duplicated_taus_give_identical_columns() {
        let p = init_params(3, &small_arch(FusionMethod::Hadamard), 5, 3).unwrap();
        let obs = vec![Observation::one_hot(5, 2)];
        let z = quantile_forward(&p.phi, &obs, &[0.5, 0.5]).unwrap();
        for a in 0..3 {
            assert_eq!(z.get(0, a, 0), z.get(0, a, 1));
        }
    }

    #[test]
    fn zero_quantile_head_gives_bias() {
        let mut p = init_params(3, &small_arch(FusionMethod::Hadamard), 5, 2).unwrap();
        p.phi.head.weight.fill(0.0);
        p.phi.head.bias = vec![-1.5, 2.0];
        let obs = vec![Observation::one_hot(5, 0), Observation::one_hot(5, 3)];
        let z = quantile_forward(&p.phi, &obs, &[0.0, 0.3, 1.0]).unwrap();
        for b in 0..2 {
            for t in 0..3 {
                assert_eq!(z.get(b, 0, t), -1.5);
                assert_eq!(z.get(b, 1, t), 2.0);
            }
        }
    }

    #[test]
    fn quantile_vector_mixes_by_policy() {
        let mut p = init_params(4, &small_arch(FusionMethod::Hadamard), 5, 2).unwrap();
        let obs = vec![Observation::one_hot(5, 1)];
        let z = quantile_forward(&p.phi, &obs, &midpoint_taus(4)).unwrap();
        // Uniform policy: average of the two action columns.
        p.theta.policy_head.weight.fill(0.0);
        p.theta.policy_head.bias.fill(0.0);
        let q = state_quantile_vector(&p.phi, &p.theta, &obs, 4).unwrap();
        for j in 0..4 {
            let want = 0.5 * (z.get(0, 0, j) + z.get(0, 1, j));
            assert!((q[0][j] - want).abs() < 1e-15);
        }
        // Deterministic policy on action 1.
        p.theta.policy_head.bias = vec![-800.0, 800.0];
        let q = state_quantile_vector(&p.phi, &p.theta, &obs, 4).unwrap();
        for j in 0..4 {
            assert_eq!(q[0][j], z.get(0, 1, j));
        }
    }

    #[test]
    fn single_action_quantile_vector_is_the_column() {
        let p = init_params(4, &small_arch(FusionMethod::Hadamard), 5, 1).unwrap();
        let obs = vec![Observation::one_hot(5, 1)];
        let z = quantile_forward(&p.phi, &obs, &midpoint_taus(4)).unwrap();
        let q = state_quantile_vector(&p.phi, &p.theta, &obs, 4).unwrap();
        assert_eq!(q[0], z.row(0).to_vec());
    }

    #[test]
    fn fusion_identities() {
        let h = init_params(7, &small_arch(FusionMethod::Hadamard), 5, 2).unwrap().psi;
        assert_eq!(h.fuse(0.0, &[1.0, -2.0, 3.0, 0.5]).unwrap(), h.head(&[0.0; 4]));

        let avg = init_params(7, &small_arch(FusionMethod::Average), 5, 2).unwrap().psi;
        let v = 0.37;
        assert!((avg.fuse(v, &[v; 4]).unwrap() - avg.head(&[v])).abs() < 1e-15);

        let wd = init_params(7, &small_arch(FusionMethod::WeightedDiff), 5, 2).unwrap().psi;
        assert_eq!(wd.fuse(v, &[v; 4]).unwrap(), v + wd.head(&[0.0]));

        let cat = init_params(7, &small_arch(FusionMethod::Concat), 5, 2).unwrap().psi;
        assert_eq!(cat.fuse(v, &[1.0, 2.0, 3.0, 4.0]).unwrap(), cat.head(&[v, 1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn fuse_rejects_width_mismatch() {
        let psi = init_params(7, &small_arch(FusionMethod::Concat), 5, 2).unwrap().psi;
        assert!(matches!(psi.fuse(0.1, &[1.0; 3]), Err(Error::DimensionMismatch { .. })));
        assert!(fuse(&psi, &[0.1], &[vec![1.0; 4]], FusionMethod::Hadamard).is_err());
    }

    #[test]
    fn fuse_is_sensitive_to_q() {
        for method in FusionMethod::ALL {
            let psi = init_params(11, &small_arch(method), 5, 2).unwrap().psi;
            let q = [0.3, -0.4, 1.2, 0.8];
            let mut q2 = q;
            q2[2] += 0.5;
            let (a, b) = (psi.fuse(0.9, &q).unwrap(), psi.fuse(0.9, &q2).unwrap());
            assert!(a.is_finite() && b.is_finite());
            assert_ne!(a, b, "{method}");
        }
    }
}
