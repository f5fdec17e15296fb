use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agent::AgentKind;
use crate::approximator::{Activation, ArchConfig, FusionMethod};
use crate::error::{Error, Result};
use crate::losses::Bootstrap;
use crate::rollout::DEFAULT_CAPACITY;

/// Every knob of a training run.
///
/// The config file is flat `key = value` text. The first block of keys uses
/// the usual PPO argument names; the rest are harness settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_timesteps: u64,
    pub learning_rate: f64,
    pub num_envs: usize,
    pub num_steps: usize,
    pub anneal_lr: bool,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub num_minibatches: usize,
    pub update_epochs: usize,
    pub norm_adv: bool,
    pub clip_coef: f64,
    pub clip_vloss: bool,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub target_kl: Option<f64>,
    pub iqn_start: u64,
    pub num_quantiles: usize,

    pub agent: AgentKind,
    pub env: String,
    pub fusion_method: FusionMethod,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub iqn_updates_per_rollout: usize,
    pub iqn_batch_size: usize,
    pub iqn_lr: f64,
    pub iqn_n: usize,
    pub iqn_n_prime: usize,
    pub iqn_kappa: f64,
    pub iqn_bootstrap: Bootstrap,
    pub target_sync_interval: u64,
    pub buffer_capacity: usize,
    /// Epsilon-greedy schedule of the standalone IQN agent.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_fraction: f64,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub n_cos: usize,
    pub distill_hidden: usize,
    pub checkpoint_interval: usize,
    /// Off by default so that metrics files are reproducible byte for byte.
    pub log_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 1_000_000,
            learning_rate: 2.5e-4,
            num_envs: 8,
            num_steps: 128,
            anneal_lr: true,
            gamma: 0.99,
            gae_lambda: 0.95,
            num_minibatches: 4,
            update_epochs: 4,
            norm_adv: true,
            clip_coef: 0.1,
            clip_vloss: true,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            target_kl: None,
            iqn_start: 0,
            num_quantiles: 32,
            agent: AgentKind::PgRainbow,
            env: "BimodalChain".into(),
            fusion_method: FusionMethod::Hadamard,
            seed: 1,
            output_dir: None,
            iqn_updates_per_rollout: 8,
            iqn_batch_size: 32,
            iqn_lr: 2.5e-4,
            iqn_n: 8,
            iqn_n_prime: 8,
            iqn_kappa: 1.0,
            iqn_bootstrap: Bootstrap::Greedy,
            target_sync_interval: 500,
            buffer_capacity: DEFAULT_CAPACITY,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.5,
            hidden_widths: vec![64, 64],
            activation: Activation::Tanh,
            n_cos: 64,
            distill_hidden: 64,
            checkpoint_interval: 100,
            log_wall_time: false,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse::<T>().map_err(|_| format!("cannot parse '{value}'"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got '{value}'")),
    }
}

fn parse_opt_f64(value: &str) -> std::result::Result<Option<f64>, String> {
    match value.to_ascii_lowercase().as_str() {
        "none" | "" | "off" => Ok(None),
        _ => parse(value).map(Some),
    }
}

fn parse_widths(value: &str) -> std::result::Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|w| w.trim().parse::<usize>().map_err(|_| format!("bad layer width '{w}'")))
        .collect()
}

impl TrainConfig {
    pub fn batch_size(&self) -> usize {
        self.num_envs * self.num_steps
    }

    pub fn minibatch_size(&self) -> usize {
        self.batch_size() / self.num_minibatches.max(1)
    }

    /// One iteration per full batch; a trailing partial batch is dropped.
    pub fn num_iterations(&self) -> usize {
        (self.total_timesteps as usize / self.batch_size().max(1)).max(1)
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            torso_widths: self.hidden_widths.clone(),
            activation: self.activation,
            n_cos: self.n_cos,
            n_quantiles: self.num_quantiles,
            fusion: self.fusion_method,
            distill_hidden: self.distill_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_envs == 0 || self.num_steps == 0 {
            return fail("num_envs and num_steps must be positive".into());
        }
        if self.num_minibatches == 0 || self.batch_size() % self.num_minibatches != 0 {
            return fail(format!(
                "batch size {} is not divisible into {} minibatches",
                self.batch_size(),
                self.num_minibatches
            ));
        }
        if self.update_epochs == 0 {
            return fail("update_epochs must be at least 1".into());
        }
        if self.total_timesteps == 0 {
            return fail("total_timesteps must be positive".into());
        }
        if self.iqn_start > self.total_timesteps {
            return fail(format!(
                "iqn_start {} exceeds total_timesteps {}",
                self.iqn_start, self.total_timesteps
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("gamma and gae_lambda must lie in [0, 1]".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("iqn_lr", self.iqn_lr),
            ("clip_coef", self.clip_coef),
            ("max_grad_norm", self.max_grad_norm),
            ("iqn_kappa", self.iqn_kappa),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.iqn_batch_size == 0 || self.iqn_n == 0 || self.iqn_n_prime == 0 {
            return fail("IQN batch size and sample counts must be positive".into());
        }
        if self.target_sync_interval == 0 || self.buffer_capacity == 0 || self.checkpoint_interval == 0 {
            return fail("target_sync_interval, buffer_capacity and checkpoint_interval must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
            || !(self.epsilon_fraction > 0.0)
        {
            return fail("epsilon schedule out of range".into());
        }
        self.arch().validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "total_timesteps" => self.total_timesteps = parse(v)?,
            "learning_rate" => self.learning_rate = parse(v)?,
            "num_envs" => self.num_envs = parse(v)?,
            "num_steps" => self.num_steps = parse(v)?,
            "anneal_lr" => self.anneal_lr = parse_bool(v)?,
            "gamma" => self.gamma = parse(v)?,
            "gae_lambda" => self.gae_lambda = parse(v)?,
            "num_minibatches" => self.num_minibatches = parse(v)?,
            "update_epochs" => self.update_epochs = parse(v)?,
            "norm_adv" => self.norm_adv = parse_bool(v)?,
            "clip_coef" => self.clip_coef = parse(v)?,
            "clip_vloss" => self.clip_vloss = parse_bool(v)?,
            "ent_coef" => self.ent_coef = parse(v)?,
            "vf_coef" => self.vf_coef = parse(v)?,
            "max_grad_norm" => self.max_grad_norm = parse(v)?,
            "target_kl" => self.target_kl = parse_opt_f64(v)?,
            "iqn_start" => self.iqn_start = parse(v)?,
            "num_quantiles" => self.num_quantiles = parse(v)?,
            // Derived quantities: accepted only when consistent.
            "batch_size" | "minibatch_size" | "num_iterations" => {
                let want = match key.trim() {
                    "batch_size" => self.batch_size(),
                    "minibatch_size" => self.minibatch_size(),
                    _ => self.num_iterations(),
                };
                let got: usize = parse(v)?;
                if got != want {
                    return Err(format!("{} is computed at runtime ({want}), got {got}", key.trim()));
                }
            }
            "agent" => self.agent = v.parse().map_err(|e: Error| e.to_string())?,
            "env" | "env_id" => self.env = v.to_string(),
            "fusion_method" | "fusion" => self.fusion_method = v.parse().map_err(|e: Error| e.to_string())?,
            "seed" => self.seed = parse(v)?,
            "output_dir" => self.output_dir = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "iqn_updates_per_rollout" => self.iqn_updates_per_rollout = parse(v)?,
            "iqn_batch_size" => self.iqn_batch_size = parse(v)?,
            "iqn_lr" => self.iqn_lr = parse(v)?,
            "iqn_n" => self.iqn_n = parse(v)?,
            "iqn_n_prime" => self.iqn_n_prime = parse(v)?,
            "iqn_kappa" => self.iqn_kappa = parse(v)?,
            "iqn_bootstrap" => {
                self.iqn_bootstrap = match v.to_ascii_lowercase().as_str() {
                    "greedy" => Bootstrap::Greedy,
                    "policy" => Bootstrap::Policy,
                    _ => return Err(format!("iqn_bootstrap must be greedy or policy, got '{v}'")),
                }
            }
            "target_sync_interval" => self.target_sync_interval = parse(v)?,
            "buffer_capacity" => self.buffer_capacity = parse(v)?,
            "epsilon_start" => self.epsilon_start = parse(v)?,
            "epsilon_end" => self.epsilon_end = parse(v)?,
            "epsilon_fraction" => self.epsilon_fraction = parse(v)?,
            "hidden_widths" => self.hidden_widths = parse_widths(v)?,
            "activation" => {
                self.activation = match v.to_ascii_lowercase().as_str() {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    _ => return Err(format!("activation must be tanh or relu, got '{v}'")),
                }
            }
            "n_cos" => self.n_cos = parse(v)?,
            "distill_hidden" => self.distill_hidden = parse(v)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(v)?,
            "log_wall_time" => self.log_wall_time = parse_bool(v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. `path` only labels errors.
    pub fn from_str_with_path(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_with_path(&text, path)
    }

    /// All settings as ordered `(key, value)` pairs, derived sizes included.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let widths = self.hidden_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("total_timesteps", self.total_timesteps.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("num_envs", self.num_envs.to_string()),
            ("num_steps", self.num_steps.to_string()),
            ("anneal_lr", self.anneal_lr.to_string()),
            ("gamma", self.gamma.to_string()),
            ("gae_lambda", self.gae_lambda.to_string()),
            ("num_minibatches", self.num_minibatches.to_string()),
            ("update_epochs", self.update_epochs.to_string()),
            ("norm_adv", self.norm_adv.to_string()),
            ("clip_coef", self.clip_coef.to_string()),
            ("clip_vloss", self.clip_vloss.to_string()),
            ("ent_coef", self.ent_coef.to_string()),
            ("vf_coef", self.vf_coef.to_string()),
            ("max_grad_norm", self.max_grad_norm.to_string()),
            ("target_kl", self.target_kl.map_or("None".into(), |k| k.to_string())),
            ("iqn_start", self.iqn_start.to_string()),
            ("num_quantiles", self.num_quantiles.to_string()),
            ("batch_size", self.batch_size().to_string()),
            ("minibatch_size", self.minibatch_size().to_string()),
            ("num_iterations", self.num_iterations().to_string()),
            ("agent", self.agent.to_string()),
            ("env", self.env.clone()),
            ("fusion_method", self.fusion_method.to_string()),
            ("seed", self.seed.to_string()),
            (
                "output_dir",
                self.output_dir.as_ref().map_or(String::new(), |p| p.display().to_string()),
            ),
            ("iqn_updates_per_rollout", self.iqn_updates_per_rollout.to_string()),
            ("iqn_batch_size", self.iqn_batch_size.to_string()),
            ("iqn_lr", self.iqn_lr.to_string()),
            ("iqn_n", self.iqn_n.to_string()),
            ("iqn_n_prime", self.iqn_n_prime.to_string()),
            ("iqn_kappa", self.iqn_kappa.to_string()),
            (
                "iqn_bootstrap",
                match self.iqn_bootstrap {
                    Bootstrap::Greedy => "greedy".into(),
                    Bootstrap::Policy => "policy".into(),
                },
            ),
            ("target_sync_interval", self.target_sync_interval.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("epsilon_start", self.epsilon_start.to_string()),
            ("epsilon_end", self.epsilon_end.to_string()),
            ("epsilon_fraction", self.epsilon_fraction.to_string()),
            ("hidden_widths", widths),
            (
                "activation",
                match self.activation {
                    Activation::Tanh => "tanh".into(),
                    Activation::Relu => "relu".into(),
                },
            ),
            ("n_cos", self.n_cos.to_string()),
            ("distill_hidden", self.distill_hidden.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("log_wall_time", self.log_wall_time.to_string()),
        ]
    }

    /// The config in its own file format; parsing it back yields `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl FromStr for TrainConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_str_with_path(s, Path::new("<config>"))
    }
}
