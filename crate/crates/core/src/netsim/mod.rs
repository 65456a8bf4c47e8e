//! Discrete-event simulation of the asynchronous message-passing protocol.
//!
//! Channels are reliable and FIFO; every message takes a delay in `(0, 1]`
//! chosen by a [`DelayPolicy`]. Virtual time is a separate axis from the
//! chain's time and local computation takes no virtual time. Ties between
//! deliveries are broken by `(vtime, src, dst, per-channel sequence)`, so a
//! run is a pure function of the model, the schedule, `Y_0` and the policy.

mod resolve;
mod scheduler;
mod sim;
mod trace;

pub use resolve::{
    coloring_conditions, edge_factor_thresholds, possible_states, thresholds, thresholds_by_enumeration,
    ColoringConditions, Thresholds, ENUMERATION_LIMIT,
};
pub use scheduler::{DelayPolicy, FixedDelays, MessageMeta, Scheduler};
pub use sim::{run, run_with_policy, SimOutput};
pub use trace::{ceil_log2, BitCosts, RunStats, Trace, TraceEvent, TraceKind, Trigger, WireMessage};
