//! Finite MDPs, vectorized stepping and the exact return-distribution oracle.

pub mod distribution;
pub mod external;
pub mod oracle;
pub mod spec;
pub mod suite;
pub mod vec_env;

pub use distribution::{midpoint_taus, DiscreteReturnDistribution};
pub use oracle::{exact_return_distribution, exact_return_distributions, tabular_q, OracleConfig};
pub use spec::{MdpSpec, RewardAtom, TabularPolicy};
pub use suite::{builtin, builtin_suite, load_env};
pub use vec_env::{Observation, StepOutput, VecEnv};
