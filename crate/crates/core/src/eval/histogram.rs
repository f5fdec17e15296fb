use serde::{Deserialize, Serialize};

use super::evaluate::{run_episode, EvalMode};
use super::wasserstein::wasserstein1_samples;
use crate::agent::Agent;
use crate::env::vec_env::sample_start;
use crate::env::{MdpSpec, Observation};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// What fills the first ("value") histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSource {
    /// The critic's `V(s0)` at each episode's initial state.
    #[default]
    Critic,
    /// Realized discounted returns of unconstrained episodes.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub n_free: usize,
    pub n_fixed: usize,
    pub fixed_action: usize,
    pub n_bins: usize,
    pub gamma: f64,
    pub seed: u64,
    pub value_source: ValueSource,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            n_free: 100_000,
            n_fixed: 25_000,
            fixed_action: 0,
            n_bins: 50,
            gamma: 0.99,
            seed: 0,
            value_source: ValueSource::Critic,
        }
    }
}

/// Value histogram vs. fixed-first-action return histogram over shared bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub env: String,
    pub fixed_action: usize,
    pub value_source: ValueSource,
    pub gamma: f64,
    /// `n_bins + 1` strictly increasing edges; the last bin is closed.
    pub bins: Vec<f64>,
    pub v_counts: Vec<u64>,
    pub q_counts: Vec<u64>,
    pub n_free: usize,
    pub n_fixed: usize,
    pub v_mean: Option<f64>,
    pub q_mean: Option<f64>,
    /// W1 between the raw (unbinned) samples, when both are nonempty.
    pub w1_v_q: Option<f64>,
}

/// `n_bins` equal-width bins spanning every sample; a degenerate range is
/// widened to one unit around its value.
pub fn bin_edges(samples: &[f64], n_bins: usize) -> Vec<f64> {
    let n_bins = n_bins.max(1);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if !lo.is_finite() {
        (-0.5, 0.5)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    edges
}

pub fn bin_counts(samples: &[f64], edges: &[f64]) -> Vec<u64> {
    let n_bins = edges.len() - 1;
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let k = edges[1..].partition_point(|&e| e <= x).min(n_bins - 1);
        counts[k] += 1;
    }
    counts
}

/// Collects the two sample sets of the histogram experiment.
pub fn histogram_samples(agent: &Agent, spec: &MdpSpec, cfg: &HistogramConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.fixed_action >= spec.n_actions {
        return Err(Error::InvalidAction {
            action: cfg.fixed_action,
            n_actions: spec.n_actions,
        });
    }
    let emb = agent.midpoint_embeddings();
    let v = (0..cfg.n_free)
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, Stream::Eval, k as u64);
            let s0 = sample_start(spec, &mut rng);
            match cfg.value_source {
                ValueSource::Critic => {
                    let obs = Observation::one_hot(spec.n_states, s0);
                    agent.policy_and_value(&obs, 0.0, true, &emb).map(|(_, v)| v)
                }
                ValueSource::Realized => Ok(run_episode(agent, spec, s0, None, EvalMode::Sample, cfg.gamma, &mut rng)),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let offset = cfg.n_free as u64;
    let q = (0..cfg.n_fixed)
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, Stream::Eval, offset + k as u64);
            let s0 = sample_start(spec, &mut rng);
            run_episode(agent, spec, s0, Some(cfg.fixed_action), EvalMode::Sample, cfg.gamma, &mut rng)
        })
        .collect();
    Ok((v, q))
}

/// Runs the experiment and bins both sample sets on shared edges.
pub fn histogram_experiment(agent: &Agent, spec: &MdpSpec, cfg: &HistogramConfig) -> Result<HistogramReport> {
    let (v, q) = histogram_samples(agent, spec, cfg)?;
    let pooled: Vec<f64> = v.iter().chain(&q).copied().collect();
    let bins = bin_edges(&pooled, cfg.n_bins);
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let w1_v_q = if v.is_empty() || q.is_empty() {
        None
    } else {
        Some(wasserstein1_samples(&v, &q)?)
    };
    Ok(HistogramReport {
        env: spec.name.clone(),
        fixed_action: cfg.fixed_action,
        value_source: cfg.value_source,
        gamma: cfg.gamma,
        v_counts: bin_counts(&v, &bins),
        q_counts: bin_counts(&q, &bins),
        bins,
        n_free: v.len(),
        n_fixed: q.len(),
        v_mean: mean(&v),
        q_mean: mean(&q),
        w1_v_q,
    })
}
