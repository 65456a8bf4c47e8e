use std::fmt::Write as _;

use crate::error::Result;
use crate::model::{Configuration, SpinModel, State};
use crate::schedule::{UpdateId, UpdateSchedule};

/// One processed update of the continuous-time chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub update: UpdateId,
    pub time: f64,
    /// State of the node right after the update.
    pub state: State,
    pub accepted: bool,
}

/// Result of running the continuous-time chain up to the schedule horizon.
#[derive(Debug, Clone)]
pub struct ContinuousRun {
    pub final_config: Configuration,
    pub trajectory: Vec<TrajectoryStep>,
    // history[v][i] = state of v right after its i-th update; index 0 is Y_0(v)
    history: Vec<Vec<State>>,
}

impl ContinuousRun {
    /// `Y_v^{(0)}, ..., Y_v^{(m_v)}`.
    pub fn history(&self, v: usize) -> &[State] {
        &self.history[v]
    }

    pub fn state_after(&self, id: UpdateId) -> State {
        self.history[id.node][id.index]
    }

    /// `Y_t(v)` with the right-open convention: the value set by the last
    /// update at or before `t`.
    pub fn state_at(&self, schedule: &UpdateSchedule, v: usize, t: f64) -> State {
        let done = schedule.node(v).times.partition_point(|&s| s <= t);
        self.history[v][done]
    }

    /// One `node index time new_state` line per update, in processing order.
    pub fn trajectory_text(&self) -> String {
        let mut out = String::new();
        for step in &self.trajectory {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                step.update.node, step.update.index, step.time, step.state
            );
        }
        out
    }
}

/// Runs the continuous-time chain driven by `schedule`: at update `(v, i)` the
/// proposal is accepted iff its coin is strictly below the filter evaluated on
/// the current neighborhood.
pub fn run_continuous(model: &SpinModel, schedule: &UpdateSchedule, initial: &Configuration) -> Result<ContinuousRun> {
    model.validate_configuration(initial)?;
    schedule.validate_for(model)?;

    let graph = model.graph();
    let mut current = initial.clone();
    let mut history: Vec<Vec<State>> = (0..model.node_count())
        .map(|v| {
            let mut h = Vec::with_capacity(schedule.update_count(v) + 1);
            h.push(initial[v]);
            h
        })
        .collect();
    let mut trajectory = Vec::with_capacity(schedule.total_updates());
    let mut tau = Vec::with_capacity(graph.max_degree());

    for id in schedule.total_order() {
        let v = id.node;
        tau.clear();
        tau.extend(graph.neighbors(v).iter().map(|&u| current[u]));
        let c = current[v];
        let proposal = schedule.proposal(id);
        let accepted = schedule.coin(id) < model.filter(v, c, proposal, &tau);
        if accepted {
            current.values_mut()[v] = proposal;
        }
        history[v].push(current[v]);
        trajectory.push(TrajectoryStep {
            update: id,
            time: schedule.time(id),
            state: current[v],
            accepted,
        });
    }

    Ok(ContinuousRun {
        final_config: current,
        trajectory,
        history,
    })
}
