use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng as _;

use pgrainbow::env::{builtin, exact_return_distributions, OracleConfig};
use pgrainbow::losses::{iqn_loss_with_grad, ppo_objective, CriticPath, IqnLossConfig, PpoCoefs, PpoSample};
use pgrainbow::rng::{stream_rng, Stream};
use pgrainbow::rollout::{collect, compute_gae_batch, ReplayBuffer};
use pgrainbow::{Agent, AgentKind, ArchConfig, VecEnv};

fn oracle(c: &mut Criterion) {
    let grid = builtin("SlipGrid").unwrap();
    let uniform = grid.uniform_policy();
    c.bench_function("oracle SlipGrid uniform", |b| {
        b.iter(|| exact_return_distributions(black_box(&grid), &uniform, 0.99, &OracleConfig::default()).unwrap())
    });
}

fn training_steps(c: &mut Criterion) {
    let spec = Arc::new(builtin("BimodalChain").unwrap());
    let agent = Agent::new(AgentKind::PgRainbow, ArchConfig::default(), 0, spec.obs_dim(), spec.n_actions).unwrap();
    let mut buffer = ReplayBuffer::new(50_000).unwrap();
    let mut venv = VecEnv::new(spec.clone(), 8, 0).unwrap();
    let mut rng = stream_rng(0, Stream::Action, 0);
    let mut batch = collect(&mut venv, &agent, 128, true, 0.0, Some(&mut buffer), &mut rng).unwrap();
    batch.compute_advantages(0.99, 0.95).unwrap();

    c.bench_function("collect 8x128 pg-rainbow", |b| {
        b.iter(|| collect(&mut venv, &agent, 128, true, 0.0, None, &mut rng).unwrap())
    });

    c.bench_function("gae 8x128", |b| {
        b.iter(|| {
            compute_gae_batch(
                black_box(&batch.rewards),
                &batch.values,
                &batch.dones,
                &batch.bootstrap_values,
                0.99,
                0.95,
            )
            .unwrap()
        })
    });

    let emb = agent.midpoint_embeddings();
    let zs: Vec<Vec<f64>> = batch.obs[..256].iter().map(|o| agent.state_quantiles_with(o, &emb)).collect();
    let samples: Vec<PpoSample<'_>> = (0..256)
        .map(|i| PpoSample {
            obs: &batch.obs[i],
            action: batch.actions[i],
            old_logprob: batch.logprobs[i],
            advantage: batch.advantages[i],
            ret: batch.returns[i],
            old_value: batch.values[i],
            quantiles: Some(&zs[i]),
        })
        .collect();
    let coefs = PpoCoefs {
        clip_coef: 0.1,
        clip_vloss: true,
        vf_coef: 0.5,
        ent_coef: 0.01,
        norm_adv: true,
    };
    c.bench_function("ppo objective minibatch 256 fused", |b| {
        b.iter(|| ppo_objective(&agent.params.theta, &agent.params.psi, black_box(&samples), CriticPath::Fused, &coefs).unwrap())
    });

    let cfg = IqnLossConfig::default();
    let mut iqn_rng = stream_rng(0, Stream::Iqn, 0);
    let sample = buffer.sample(32, &mut iqn_rng).unwrap();
    c.bench_function("iqn loss+grad batch 32", |b| {
        b.iter(|| {
            let seed: u64 = iqn_rng.gen();
            let mut r = stream_rng(seed, Stream::Iqn, 0);
            iqn_loss_with_grad(&agent.params.phi, &agent.params.phi_target, black_box(&sample), &cfg, None, &mut r).unwrap()
        })
    });
}

criterion_group!(benches, oracle, training_steps);
criterion_main!(benches);
