//! Training objectives with analytic gradients.

pub mod huber;
pub mod iqn;
pub mod ppo;

pub use huber::{huber, huber_grad, quantile_huber, quantile_huber_grad};
pub use iqn::{iqn_loss, iqn_loss_with_grad, Bootstrap, IqnLossConfig};
pub use ppo::{
    entropy_bonus, entropy_with_grad, normalize_advantages, ppo_clip_loss, ppo_clip_loss_with_grad, ppo_objective,
    value_loss, value_loss_with_grad, ClipLossOutput, CriticPath, PpoCoefs, PpoGrads, PpoLossParts, PpoSample,
};
