//! On-policy collection, advantage estimation and the replay buffer.

pub mod buffer;
pub mod collect;
pub mod gae;

pub use buffer::{ReplayBuffer, Transition, DEFAULT_CAPACITY};
pub use collect::{collect, RolloutBatch};
pub use gae::{compute_gae, compute_gae_batch};
