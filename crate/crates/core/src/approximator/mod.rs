//! Parametric maps: actor-critic, implicit quantile network, distillation net.

pub mod arch;
pub mod checkpoint;
pub mod networks;
pub mod nn;
pub mod params;

pub use arch::{ArchConfig, FusionMethod};
pub use networks::{ActorCritic, DistillNet, QuantileNet};
pub use nn::{Activation, ParamSet};
pub use params::{
    fuse, init_params, mix_quantiles, policy_value_forward, quantile_forward, state_quantile_vector, AgentParams,
    QuantileSample,
};
