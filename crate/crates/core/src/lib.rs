//! Asynchronous distributed simulation of single-site Metropolis chains.
//!
//! Every node of a graphical model draws its own Poisson update times and
//! proposals, exchanges them with its neighbors, and then resolves its updates
//! one by one by exchanging `Accept`/`Reject` decisions. A coupled coin lets a
//! node decide an update before it knows its whole neighborhood. The modules:
//!
//! - [`model`]: graphs, proposals, Metropolis filters, Lipschitz constants.
//! - [`schedule`]: the shared randomness (update times, proposals, coins).
//! - [`oracle`]: sequential reference chains and exact distributions.
//! - [`netsim`]: discrete-event simulation of the message-passing protocol.
//! - [`instrument`]: dependency chains and Phase-II residence times.
//! - [`harness`]: configuration files and experiment runners.

pub mod error;
pub mod harness;
pub mod instrument;
pub mod model;
pub mod netsim;
pub mod oracle;
pub mod schedule;

pub use error::{Error, Result};
pub use model::{Configuration, Graph, ModelKind, SpinModel, State};
pub use netsim::{RunStats, Scheduler};
pub use schedule::{UpdateId, UpdateSchedule};
