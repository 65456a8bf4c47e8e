//! Post-hoc analysis of simulation traces: which update triggered each
//! resolution, the dependency chains these form, and how long nodes stay in
//! Phase II compared with their chain lengths.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{RunStats, Trace, TraceKind, Trigger};
use crate::schedule::{UpdateId, UpdateSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependencyRecord {
    pub update: UpdateId,
    pub trigger: Trigger,
    pub resolve_vtime: f64,
}

/// One record per update, `records[v][i - 1]` for update `(v, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyRecords {
    records: Vec<Vec<DependencyRecord>>,
}

impl DependencyRecords {
    pub fn get(&self, id: UpdateId) -> Option<&DependencyRecord> {
        self.records.get(id.node)?.get(id.index.checked_sub(1)?)
    }

    pub fn node(&self, v: usize) -> &[DependencyRecord] {
        &self.records[v]
    }

    pub fn node_count(&self) -> usize {
        self.records.len()
    }
}

/// Extracts the trigger of every resolution from a trace.
pub fn record_triggers(trace: &Trace, schedule: &UpdateSchedule) -> Result<DependencyRecords> {
    let n = schedule.node_count();
    if trace.node_count != n {
        return Err(Error::InvalidArgument(format!(
            "trace has {} nodes, schedule has {n}",
            trace.node_count
        )));
    }
    let mut records: Vec<Vec<DependencyRecord>> = (0..n).map(|v| Vec::with_capacity(schedule.update_count(v))).collect();
    for e in &trace.events {
        if let TraceKind::Resolve { update, trigger, .. } = e.kind {
            let v = update.node;
            if v >= n || update.index != records[v].len() + 1 || update.index > schedule.update_count(v) {
                return Err(Error::Invariant(format!("unexpected resolution of {update:?}")));
            }
            records[v].push(DependencyRecord {
                update,
                trigger,
                resolve_vtime: e.vtime,
            });
        }
    }
    if let Some(v) = (0..n).find(|&v| records[v].len() != schedule.update_count(v)) {
        return Err(Error::Invariant(format!(
            "node {v} resolved {} of {} updates",
            records[v].len(),
            schedule.update_count(v)
        )));
    }
    Ok(DependencyRecords { records })
}

fn predecessor(record: &DependencyRecord) -> Option<UpdateId> {
    match record.trigger {
        Trigger::SelfTriggered if record.update.index == 1 => None,
        Trigger::SelfTriggered => Some(UpdateId::new(record.update.node, record.update.index - 1)),
        Trigger::TriggeredBy(by) => Some(by),
    }
}

/// The dependency chain ending at `target`. A self-triggered first update
/// starts a chain, a later self-triggered update extends the chain of the
/// node's previous update, and a triggered update extends its trigger's chain.
pub fn chain_of(records: &DependencyRecords, schedule: &UpdateSchedule, target: UpdateId) -> Result<Vec<UpdateId>> {
    let mut chain = vec![target];
    let mut at = target;
    let bound = schedule.total_updates();
    loop {
        let record = records
            .get(at)
            .ok_or_else(|| Error::Invariant(format!("no record for {at:?}")))?;
        let Some(prev) = predecessor(record) else { break };
        if !schedule.precedes(prev, at) || chain.len() > bound {
            return Err(Error::Invariant(format!(
                "dependency chain through {at:?} is not monotone (cycle)"
            )));
        }
        chain.push(prev);
        at = prev;
    }
    chain.reverse();
    Ok(chain)
}

/// Length (number of updates) of the chain ending at every update,
/// `lengths[v][i - 1]`.
pub fn chain_lengths(records: &DependencyRecords, schedule: &UpdateSchedule) -> Result<Vec<Vec<usize>>> {
    let mut lengths: Vec<Vec<usize>> = (0..schedule.node_count())
        .map(|v| vec![0; schedule.update_count(v)])
        .collect();
    for id in schedule.total_order() {
        let record = records
            .get(id)
            .ok_or_else(|| Error::Invariant(format!("no record for {id:?}")))?;
        lengths[id.node][id.index - 1] = match predecessor(record) {
            None => 1,
            Some(prev) => {
                let len = lengths
                    .get(prev.node)
                    .and_then(|l| l.get(prev.index.wrapping_sub(1)))
                    .copied()
                    .unwrap_or(0);
                if len == 0 || !schedule.precedes(prev, id) {
                    return Err(Error::Invariant(format!("{id:?} depends on {prev:?}, which does not precede it")));
                }
                len + 1
            }
        };
    }
    Ok(lengths)
}

/// Phase-II residence per node next to the length of the chain ending at the
/// node's last update (0 for nodes without updates).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidenceReport {
    pub residence: Vec<f64>,
    pub chain_len: Vec<usize>,
}

impl ResidenceReport {
    pub fn max_residence(&self) -> f64 {
        self.residence.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_chain_len(&self) -> usize {
        self.chain_len.iter().copied().max().unwrap_or(0)
    }

    /// Nodes with `ceil(R_v) > len(D_v)`.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.residence.len())
            .filter(|&v| self.residence[v].ceil() > self.chain_len[v] as f64)
            .collect()
    }
}

pub fn phase2_residence(stats: &RunStats, records: &DependencyRecords, schedule: &UpdateSchedule) -> Result<ResidenceReport> {
    let lengths = chain_lengths(records, schedule)?;
    Ok(ResidenceReport {
        residence: stats.residence.clone(),
        chain_len: lengths.iter().map(|l| l.last().copied().unwrap_or(0)).collect(),
    })
}

/// Trace analysis in one call.
pub fn analyze(trace: &Trace, stats: &RunStats, schedule: &UpdateSchedule) -> Result<ResidenceReport> {
    let records = record_triggers(trace, schedule)?;
    phase2_residence(stats, &records, schedule)
}

/// One CSV row per simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub scheduler: String,
    pub n: usize,
    pub max_degree: usize,
    /// `q` for coloring and custom models, `lambda` for hardcore, `beta` for Ising.
    pub param: f64,
    pub horizon: f64,
    pub makespan: f64,
    pub phase1_end: f64,
    pub max_residence: f64,
    pub max_chain_len: usize,
    pub messages: u64,
    pub bits: u64,
}

pub const RUN_CSV_HEADER: &str =
    "seed,scheduler,n,max_degree,param,horizon,makespan,phase1_end,max_residence,max_chain_len,messages,bits";

pub fn write_rows<W: io::Write>(writer: W, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: io::Read>(reader: R) -> Result<Vec<RunRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
