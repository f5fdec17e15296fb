//! The training loop: rollout, IQN updates from replay, then K-epoch PPO.

pub mod config;
pub mod metrics;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;

pub use config::TrainConfig;
pub use metrics::{MetricsHeader, MetricsLog, MetricsRecord, MetricsWriter};

use crate::agent::{Agent, AgentKind};
use crate::approximator::checkpoint::Checkpoint;
use crate::env::{load_env, MdpSpec, VecEnv};
use crate::error::{Error, Result};
use crate::losses::{iqn_loss_with_grad, ppo_objective, CriticPath, IqnLossConfig, PpoCoefs, PpoLossParts, PpoSample};
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::rng::{stream_rng, Rng, Stream};
use crate::rollout::{collect, ReplayBuffer, RolloutBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Open,
    Closed,
}

/// Quantile information reaches the critic only from `iqn_start` on.
pub fn distill_gate(global_step: u64, iqn_start: u64) -> Gate {
    if global_step < iqn_start {
        Gate::Closed
    } else {
        Gate::Open
    }
}

/// Linear decay from `base_lr` at iteration 1 to `base_lr / total` at the last.
pub fn anneal_lr(iteration: usize, total_iterations: usize, base_lr: f64) -> f64 {
    base_lr * (1.0 - (iteration as f64 - 1.0) / total_iterations as f64)
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Training state between iterations.
pub struct Trainer {
    pub config: TrainConfig,
    pub agent: Agent,
    spec: Arc<MdpSpec>,
    venv: VecEnv,
    buffer: Option<ReplayBuffer>,
    action_rng: Rng,
    shuffle_rng: Rng,
    iqn_rng: Rng,
    opt_theta: Adam,
    opt_psi: Adam,
    opt_phi: Adam,
    global_step: u64,
    iteration: usize,
    iqn_steps: u64,
    started: Instant,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        let spec = load_env(&config.env)?;
        Self::with_spec(config, spec)
    }

    pub fn with_spec(config: TrainConfig, spec: MdpSpec) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        let spec = Arc::new(spec);
        let agent = Agent::new(config.agent, config.arch(), config.seed, spec.obs_dim(), spec.n_actions)?;
        let venv = VecEnv::new(spec.clone(), config.num_envs, config.seed)?;
        let buffer = if config.agent.uses_iqn() {
            Some(ReplayBuffer::new(config.buffer_capacity)?)
        } else {
            None
        };
        let adam = AdamConfig::default();
        Ok(Self {
            opt_theta: Adam::new(&agent.params.theta, adam),
            opt_psi: Adam::new(&agent.params.psi, adam),
            opt_phi: Adam::new(&agent.params.phi, adam),
            action_rng: stream_rng(config.seed, Stream::Action, 0),
            shuffle_rng: stream_rng(config.seed, Stream::Shuffle, 0),
            iqn_rng: stream_rng(config.seed, Stream::Iqn, 0),
            config,
            agent,
            spec,
            venv,
            buffer,
            global_step: 0,
            iteration: 0,
            iqn_steps: 0,
            started: Instant::now(),
        })
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.spec
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn iqn_steps(&self) -> u64 {
        self.iqn_steps
    }

    pub fn buffer(&self) -> Option<&ReplayBuffer> {
        self.buffer.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.num_iterations()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: self.agent.kind,
            arch: self.agent.arch.clone(),
            params: self.agent.params.clone(),
        }
    }

    /// Exploration rate of the standalone IQN agent at the current step.
    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        let horizon = c.epsilon_fraction * c.total_timesteps as f64;
        let progress = (self.global_step as f64 / horizon).min(1.0);
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * progress
    }

    fn gate(&self) -> Gate {
        match self.agent.kind {
            AgentKind::PgRainbow => distill_gate(self.global_step, self.config.iqn_start),
            _ => Gate::Open,
        }
    }

    fn critic_path(&self, gate: Gate) -> CriticPath {
        match (self.agent.kind, gate) {
            (AgentKind::PgRainbow, Gate::Open) => CriticPath::Fused,
            (AgentKind::Disjoint, _) => CriticPath::Disjoint,
            _ => CriticPath::Theta,
        }
    }

    /// Runs one collect, IQN, GAE, PPO cycle.
    pub fn run_iteration(&mut self) -> Result<MetricsRecord> {
        self.iteration += 1;
        let gate = self.gate();
        let lr = if self.config.anneal_lr {
            anneal_lr(self.iteration, self.config.num_iterations(), self.config.learning_rate)
        } else {
            self.config.learning_rate
        };
        let epsilon = self.epsilon();
        let mut batch = collect(
            &mut self.venv,
            &self.agent,
            self.config.num_steps,
            gate == Gate::Open,
            epsilon,
            self.buffer.as_mut(),
            &mut self.action_rng,
        )?;
        self.global_step += batch.len() as u64;

        let iqn_loss = if self.agent.kind.uses_iqn() { self.update_iqn()? } else { None };

        batch.compute_advantages(self.config.gamma, self.config.gae_lambda)?;
        let parts = if self.agent.kind.uses_policy_net() {
            Some(self.update_ppo(&batch, gate, lr)?)
        } else {
            None
        };

        let (mean, std) = mean_std(&batch.episode_returns);
        Ok(MetricsRecord {
            iteration: self.iteration,
            global_step: self.global_step,
            episodic_return_mean: mean,
            episodic_return_std: std,
            episodes: batch.episode_returns.len(),
            policy_loss: parts.map(|p| p.policy_loss),
            value_loss: parts.map(|p| p.value_loss),
            entropy: parts.map(|p| p.entropy),
            iqn_loss,
            clip_fraction: parts.map(|p| p.clip_fraction),
            approx_kl: parts.map(|p| p.approx_kl),
            learning_rate: lr,
            gate_open: gate == Gate::Open,
            wall_time: self
                .config
                .log_wall_time
                .then(|| self.started.elapsed().as_secs_f64()),
        })
    }

    /// `iqn_updates_per_rollout` steps on `phi`; `None` while the buffer is
    /// smaller than one IQN batch.
    pub fn update_iqn(&mut self) -> Result<Option<f64>> {
        let c = &self.config;
        let Some(buffer) = self.buffer.as_ref() else {
            return Ok(None);
        };
        if buffer.len() < c.iqn_batch_size {
            info!(
                "replay buffer holds {} transitions, fewer than one IQN batch of {}; skipping",
                buffer.len(),
                c.iqn_batch_size
            );
            return Ok(None);
        }
        let cfg = IqnLossConfig {
            n: c.iqn_n,
            n_prime: c.iqn_n_prime,
            kappa: c.iqn_kappa,
            gamma: c.gamma,
            bootstrap: c.iqn_bootstrap,
        };
        let mut total = 0.0;
        for _ in 0..c.iqn_updates_per_rollout {
            let sample = buffer.sample(c.iqn_batch_size, &mut self.iqn_rng)?;
            let params = &mut self.agent.params;
            let policy = self.agent.kind.uses_policy_net().then_some(&params.theta);
            let (loss, grad) =
                iqn_loss_with_grad(&params.phi, &params.phi_target, &sample, &cfg, policy, &mut self.iqn_rng)?;
            self.opt_phi.step(&mut params.phi, &grad, c.iqn_lr);
            self.iqn_steps += 1;
            if self.iqn_steps % c.target_sync_interval == 0 {
                params.sync_target();
            }
            total += loss;
        }
        Ok(Some(total / c.iqn_updates_per_rollout.max(1) as f64))
    }

    /// K epochs of shuffled minibatch updates on `theta` (and `psi` when the
    /// fused critic is in use). Quantile vectors are computed once, from the
    /// freshly updated `phi`, before the first epoch. Returns loss parts
    /// averaged over minibatches.
    pub fn update_ppo(&mut self, batch: &RolloutBatch, gate: Gate, lr: f64) -> Result<PpoLossParts> {
        let path = self.critic_path(gate);
        let quantiles: Vec<Vec<f64>> = if path == CriticPath::Theta {
            Vec::new()
        } else {
            let emb = self.agent.midpoint_embeddings();
            batch
                .obs
                .iter()
                .map(|o| self.agent.state_quantiles_with(o, &emb))
                .collect()
        };
        let c = &self.config;
        let coefs = PpoCoefs {
            clip_coef: c.clip_coef,
            clip_vloss: c.clip_vloss,
            vf_coef: c.vf_coef,
            ent_coef: c.ent_coef,
            norm_adv: c.norm_adv,
        };
        let mb = c.minibatch_size();
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut acc = PpoLossParts::default();
        let mut count = 0usize;
        'epochs: for _ in 0..c.update_epochs {
            order.shuffle(&mut self.shuffle_rng);
            for chunk in order.chunks(mb) {
                let samples: Vec<PpoSample<'_>> = chunk
                    .iter()
                    .map(|&i| PpoSample {
                        obs: &batch.obs[i],
                        action: batch.actions[i],
                        old_logprob: batch.logprobs[i],
                        advantage: batch.advantages[i],
                        ret: batch.returns[i],
                        old_value: batch.values[i],
                        quantiles: quantiles.get(i).map(Vec::as_slice),
                    })
                    .collect();
                let params = &mut self.agent.params;
                let (parts, mut grads) = ppo_objective(&params.theta, &params.psi, &samples, path, &coefs)?;
                clip_grad_norm(&mut [&mut grads.theta, &mut grads.psi], c.max_grad_norm);
                self.opt_theta.step(&mut params.theta, &grads.theta, lr);
                if path == CriticPath::Fused {
                    self.opt_psi.step(&mut params.psi, &grads.psi, lr);
                }
                acc.policy_loss += parts.policy_loss;
                acc.value_loss += parts.value_loss;
                acc.entropy += parts.entropy;
                acc.total += parts.total;
                acc.clip_fraction += parts.clip_fraction;
                acc.approx_kl += parts.approx_kl;
                count += 1;
                if c.target_kl.is_some_and(|kl| parts.approx_kl > kl) {
                    break 'epochs;
                }
            }
        }
        let k = 1.0 / count.max(1) as f64;
        Ok(PpoLossParts {
            policy_loss: acc.policy_loss * k,
            value_loss: acc.value_loss * k,
            entropy: acc.entropy * k,
            total: acc.total * k,
            clip_fraction: acc.clip_fraction * k,
            approx_kl: acc.approx_kl * k,
        })
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub records: Vec<MetricsRecord>,
    pub global_step: u64,
}

fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("checkpoint-{iteration:06}.ckpt"))
}

/// Runs a full training job. With an output directory this writes
/// `config.txt`, `metrics.jsonl`, periodic checkpoints and `final.ckpt`.
/// A non-finite loss aborts the run after saving `diagnostic.ckpt`.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone())?;
    let dir = config.output_dir.clone();
    let mut writer = match &dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join("config.txt"), config.to_config_string())?;
            let header = MetricsHeader {
                config: config
                    .entries()
                    .into_iter()
                    .filter(|(k, _)| *k != "output_dir")
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            };
            let file = BufWriter::new(fs::File::create(d.join("metrics.jsonl"))?);
            Some(MetricsWriter::new(file, &header)?)
        }
        None => None,
    };
    let mut records = Vec::with_capacity(config.num_iterations());
    while !trainer.is_done() {
        let record = match trainer.run_iteration() {
            Ok(r) => r,
            Err(e @ Error::NonFinite(_)) => {
                if let Some(d) = &dir {
                    let path = d.join("diagnostic.ckpt");
                    match trainer.checkpoint().save(&path) {
                        Ok(()) => warn!("non-finite loss; parameters saved to {}", path.display()),
                        Err(save_err) => warn!("non-finite loss; diagnostic checkpoint failed: {save_err}"),
                    }
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        if let Some(w) = writer.as_mut() {
            w.write(&record)?;
        }
        if let Some(d) = &dir {
            if trainer.iteration() % config.checkpoint_interval == 0 {
                trainer.checkpoint().save(&checkpoint_path(d, trainer.iteration()))?;
            }
        }
        if trainer.iteration() % 50 == 0 || trainer.is_done() {
            info!(
                "{} {} iter {}/{} step {} return {:?}",
                config.agent,
                config.env,
                trainer.iteration(),
                config.num_iterations(),
                record.global_step,
                record.episodic_return_mean
            );
        }
        records.push(record);
    }
    if let Some(d) = &dir {
        trainer.checkpoint().save(&d.join("final.ckpt"))?;
    }
    Ok(TrainOutcome {
        global_step: trainer.global_step(),
        agent: trainer.agent,
        records,
    })
}
