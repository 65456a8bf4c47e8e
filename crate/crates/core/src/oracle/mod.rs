//! Sequential reference implementations: the continuous-time chain driven by
//! a fixed schedule, the discrete-time chain, exhaustive stationary
//! distributions for tiny instances, and Poisson step-count helpers.

pub mod bridge;
mod continuous;
mod discrete;
mod exact;

pub use bridge::{discrete_continuous_bridge, PoissonBridge};
pub use continuous::{run_continuous, ContinuousRun, TrajectoryStep};
pub use discrete::{run_discrete, DiscreteChain};
pub use exact::{exact_distribution, exact_stationary, ConfigHistogram, ExactDistribution, EXACT_STATE_LIMIT};
