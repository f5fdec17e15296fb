//! PPO, IQN and PG-Rainbow on finite MDPs with exact return-distribution oracles.

pub mod agent;
pub mod approximator;
pub mod env;
pub mod error;
pub mod eval;
pub mod losses;
pub mod optim;
pub mod rng;
pub mod rollout;
pub mod trainer;

pub use agent::{Agent, AgentKind};
pub use approximator::{AgentParams, ArchConfig, FusionMethod};
pub use env::{DiscreteReturnDistribution, MdpSpec, Observation, VecEnv};
pub use error::{Error, Result};
pub use eval::{evaluate, histogram_experiment, wasserstein1, EvalMode, EvalSummary, HistogramReport};
pub use trainer::{train, TrainConfig, TrainOutcome, Trainer};
