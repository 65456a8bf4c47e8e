//! Configuration files and experiment runners behind the command-line tool.

mod config;
mod runner;
mod sweep;

pub use config::{ChainSection, Config, ExperimentSection, GraphSection, ModelSection, SchedulerSection};
pub use runner::{
    run_all, target_distribution, thread_pool, tv_test, verify_coupling, CouplingReport, Experiment, Mismatch,
    RunRecord, Tamper, TvReport, WORKERS_ENV,
};
pub use sweep::{chain_tail_threshold, sweep, ResidenceFit, SweepReport, SweepSummary};
