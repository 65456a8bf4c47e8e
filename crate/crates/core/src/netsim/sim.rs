use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use super::resolve::{coloring_conditions, factor_range, knowledge, thresholds_by_enumeration, Knowledge, Thresholds};
use super::scheduler::{DelayPolicy, MessageMeta, Scheduler};
use super::trace::{BitCosts, RunStats, Trace, TraceEvent, TraceKind, Trigger, WireMessage};
use crate::error::{invalid, Error, Result};
use crate::model::{Configuration, ModelKind, SpinModel, State};
use crate::schedule::{UpdateId, UpdateSchedule};

/// Result of one distributed run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub final_config: Configuration,
    pub stats: RunStats,
    pub trace: Option<Trace>,
}

/// Simulates the two-phase protocol with the built-in delay policy.
pub fn run(
    model: &SpinModel,
    schedule: &UpdateSchedule,
    initial: &Configuration,
    scheduler: &Scheduler,
    record_trace: bool,
) -> Result<SimOutput> {
    run_with_policy(model, schedule, initial, scheduler.policy().as_mut(), record_trace)
}

/// Simulates the two-phase protocol with an arbitrary delay policy.
///
/// Phase I: every node sends its initial value and its update list to each
/// neighbor, one update per frame, frames serialized on the channel. A node
/// enters Phase II once every neighbor's list is complete. Phase II: the node
/// resolves its updates in order, each time testing the update's coin against
/// the thresholds of the still-possible neighborhoods, and announces every
/// outcome to all neighbors.
pub fn run_with_policy(
    model: &SpinModel,
    schedule: &UpdateSchedule,
    initial: &Configuration,
    policy: &mut dyn DelayPolicy,
    record_trace: bool,
) -> Result<SimOutput> {
    model.validate_configuration(initial)?;
    schedule.validate_for(model)?;
    let mut sim = Sim::new(model, schedule, initial, policy, record_trace);
    sim.start()?;
    while let Some(Reverse(event)) = sim.queue.pop() {
        sim.deliver(event)?;
    }
    sim.finish()
}

#[derive(Debug, Clone, Copy)]
enum Payload {
    Frame(usize),
    Decision(bool),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    vtime: f64,
    src: usize,
    dst: usize,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.vtime
            .total_cmp(&other.vtime)
            .then(self.src.cmp(&other.src))
            .then(self.dst.cmp(&other.dst))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug)]
struct Channel {
    src: usize,
    dst: usize,
    // slot of src in dst's neighbor list
    slot_at_dst: usize,
    frames: usize,
    frames_delivered: usize,
    // decisions generated while phase-one frames were still queued
    backlog: Vec<bool>,
    last_delivery: f64,
    sent: u64,
    delivered: u64,
}

#[derive(Debug)]
struct Node {
    in_phase_two: bool,
    halted: bool,
    lists_missing: usize,
    pending: VecDeque<(usize, bool)>,
    // next update to resolve, 1-based
    next: usize,
    value: State,
    // per neighbor slot: resolved values Y_u^(0..j_u)
    hist: Vec<Vec<State>>,
    last_thresholds: Option<Thresholds>,
}

struct Sim<'a> {
    model: &'a SpinModel,
    schedule: &'a UpdateSchedule,
    initial: &'a Configuration,
    policy: &'a mut dyn DelayPolicy,
    bits: BitCosts,
    nodes: Vec<Node>,
    channels: Vec<Channel>,
    // channels[channel_start[v] + k] runs from v to its k-th neighbor
    channel_start: Vec<usize>,
    queue: BinaryHeap<Reverse<Event>>,
    now: f64,
    stats: RunStats,
    trace: Option<Vec<TraceEvent>>,
    scratch: Vec<Vec<State>>,
}

impl<'a> Sim<'a> {
    fn new(
        model: &'a SpinModel,
        schedule: &'a UpdateSchedule,
        initial: &'a Configuration,
        policy: &'a mut dyn DelayPolicy,
        record_trace: bool,
    ) -> Self {
        let graph = model.graph();
        let n = graph.node_count();
        let mut channel_start = Vec::with_capacity(n + 1);
        let mut channels = Vec::with_capacity(2 * graph.edge_count());
        for v in 0..n {
            channel_start.push(channels.len());
            for &u in graph.neighbors(v) {
                channels.push(Channel {
                    src: v,
                    dst: u,
                    slot_at_dst: graph.neighbor_slot(u, v).expect("symmetric adjacency"),
                    frames: schedule.update_count(v).max(1),
                    frames_delivered: 0,
                    backlog: Vec::new(),
                    last_delivery: 0.0,
                    sent: 0,
                    delivered: 0,
                });
            }
        }
        channel_start.push(channels.len());
        let nodes = (0..n)
            .map(|v| Node {
                in_phase_two: false,
                halted: false,
                lists_missing: graph.degree(v),
                pending: VecDeque::new(),
                next: 1,
                value: initial[v],
                hist: vec![Vec::new(); graph.degree(v)],
                last_thresholds: None,
            })
            .collect();
        Sim {
            model,
            schedule,
            initial,
            policy,
            bits: BitCosts::new(n, schedule.horizon(), model.q()),
            nodes,
            channels,
            channel_start,
            queue: BinaryHeap::new(),
            now: 0.0,
            stats: RunStats {
                phase2_entry: vec![f64::NAN; n],
                termination: vec![f64::NAN; n],
                ..RunStats::default()
            },
            trace: record_trace.then(Vec::new),
            scratch: Vec::new(),
        }
    }

    fn log(&mut self, kind: TraceKind) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEvent { vtime: self.now, kind });
        }
    }

    fn start(&mut self) -> Result<()> {
        for c in 0..self.channels.len() {
            self.stats.phase_one_messages += 1;
            self.transmit(c, Payload::Frame(1))?;
        }
        for v in 0..self.nodes.len() {
            if self.nodes[v].lists_missing == 0 {
                self.enter_phase_two(v)?;
            }
        }
        Ok(())
    }

    fn wire_message(&self, c: usize, payload: Payload) -> WireMessage {
        match payload {
            Payload::Frame(frame) => {
                let ch = &self.channels[c];
                WireMessage::Info {
                    frame,
                    frames: ch.frames,
                    bits: self
                        .bits
                        .info_frame(frame == 1, self.schedule.update_count(ch.src) > 0),
                }
            }
            Payload::Decision(accept) => WireMessage::Decision {
                accept,
                bits: self.bits.decision(),
            },
        }
    }

    /// Puts a message on channel `c` at the current time.
    fn transmit(&mut self, c: usize, payload: Payload) -> Result<()> {
        let msg = self.wire_message(c, payload);
        let ch = &self.channels[c];
        let meta = MessageMeta {
            src: ch.src,
            dst: ch.dst,
            send_vtime: self.now,
            seq: ch.sent,
            is_decision: matches!(payload, Payload::Decision(_)),
        };
        let delay = self.policy.delay(&meta);
        if !(delay > 0.0 && delay <= 1.0) {
            return Err(invalid(format!(
                "scheduler produced delay {delay} on channel {} -> {}",
                meta.src, meta.dst
            )));
        }
        let ch = &mut self.channels[c];
        // FIFO: never overtake the previous message on this channel
        let vtime = (self.now + delay).max(ch.last_delivery);
        ch.last_delivery = vtime;
        ch.sent += 1;
        self.queue.push(Reverse(Event {
            vtime,
            src: meta.src,
            dst: meta.dst,
            seq: meta.seq,
            payload,
        }));
        if let WireMessage::Info { .. } = msg {
            self.stats.frame_count += 1;
        }
        self.stats.total_bits += msg.bits();
        self.stats.max_message_bits = self.stats.max_message_bits.max(msg.bits());
        self.log(TraceKind::Send {
            src: meta.src,
            dst: meta.dst,
            msg,
        });
        Ok(())
    }

    fn deliver(&mut self, event: Event) -> Result<()> {
        self.now = event.vtime;
        let c = self.channel_start[event.src]
            + self
                .model
                .graph()
                .neighbor_slot(event.src, event.dst)
                .ok_or_else(|| Error::Invariant(format!("message on non-edge {} -> {}", event.src, event.dst)))?;
        let ch = &mut self.channels[c];
        if event.seq != ch.delivered {
            return Err(Error::Invariant(format!(
                "FIFO violation on {} -> {}: expected message {}, got {}",
                event.src, event.dst, ch.delivered, event.seq
            )));
        }
        ch.delivered += 1;
        let slot = ch.slot_at_dst;
        let msg = self.wire_message(c, event.payload);
        self.log(TraceKind::Deliver {
            src: event.src,
            dst: event.dst,
            msg,
        });
        match event.payload {
            Payload::Frame(frame) => self.on_frame(c, frame),
            Payload::Decision(accept) => {
                let v = event.dst;
                if self.nodes[v].in_phase_two {
                    self.on_decision(v, slot, accept)
                } else {
                    self.nodes[v].pending.push_back((slot, accept));
                    Ok(())
                }
            }
        }
    }

    fn on_frame(&mut self, c: usize, frame: usize) -> Result<()> {
        let ch = &mut self.channels[c];
        if frame != ch.frames_delivered + 1 || frame > ch.frames {
            return Err(Error::Invariant(format!(
                "frame {frame} out of order on {} -> {}",
                ch.src, ch.dst
            )));
        }
        ch.frames_delivered = frame;
        if frame < ch.frames {
            return self.transmit(c, Payload::Frame(frame + 1));
        }
        let (src, dst, slot) = (ch.src, ch.dst, ch.slot_at_dst);
        let backlog = std::mem::take(&mut ch.backlog);
        for accept in backlog {
            self.transmit(c, Payload::Decision(accept))?;
        }
        self.nodes[dst].hist[slot].push(self.initial[src]);
        self.nodes[dst].lists_missing -= 1;
        if self.nodes[dst].lists_missing == 0 {
            self.enter_phase_two(dst)?;
        }
        Ok(())
    }

    fn enter_phase_two(&mut self, v: usize) -> Result<()> {
        self.nodes[v].in_phase_two = true;
        self.stats.phase2_entry[v] = self.now;
        self.log(TraceKind::EnterPhaseTwo { node: v });
        self.try_resolve(v, Trigger::SelfTriggered)?;
        while let Some((slot, accept)) = self.nodes[v].pending.pop_front() {
            self.on_decision(v, slot, accept)?;
        }
        Ok(())
    }

    fn on_decision(&mut self, v: usize, slot: usize, accept: bool) -> Result<()> {
        let u = self.model.graph().neighbors(v)[slot];
        let node = &mut self.nodes[v];
        let hist = &mut node.hist[slot];
        let j = hist.len();
        let updates = self.schedule.node(u);
        if j > updates.len() {
            return Err(Error::Invariant(format!(
                "node {v} received a decision for update {j} of node {u}, which has {}",
                updates.len()
            )));
        }
        let value = if accept { updates.proposals[j - 1] } else { hist[j - 1] };
        hist.push(value);
        if node.halted {
            return Ok(());
        }
        self.try_resolve(v, Trigger::TriggeredBy(UpdateId::new(u, j)))
    }

    fn try_resolve(&mut self, v: usize, mut trigger: Trigger) -> Result<()> {
        let m_v = self.schedule.update_count(v);
        loop {
            if self.nodes[v].halted {
                return Ok(());
            }
            let i = self.nodes[v].next;
            if i > m_v {
                self.nodes[v].halted = true;
                self.stats.termination[v] = self.now;
                self.log(TraceKind::Halt { node: v });
                return Ok(());
            }
            let id = UpdateId::new(v, i);
            let th = self.thresholds_for(id)?;
            self.nodes[v].last_thresholds = Some(th);
            let Some(accepted) = th.decide(self.schedule.coin(id)) else {
                return Ok(());
            };
            let node = &mut self.nodes[v];
            if accepted {
                node.value = self.schedule.proposal(id);
            }
            node.next += 1;
            self.log(TraceKind::Resolve {
                update: id,
                accepted,
                trigger,
            });
            for c in self.channel_start[v]..self.channel_start[v + 1] {
                self.stats.decision_messages += 1;
                let ch = &mut self.channels[c];
                if ch.frames_delivered < ch.frames {
                    ch.backlog.push(accepted);
                } else {
                    self.transmit(c, Payload::Decision(accepted))?;
                }
            }
            trigger = Trigger::SelfTriggered;
        }
    }

    fn thresholds_for(&mut self, id: UpdateId) -> Result<Thresholds> {
        let (model, schedule) = (self.model, self.schedule);
        let v = id.node;
        let t = schedule.time(id);
        let current = self.nodes[v].value;
        let proposal = schedule.proposal(id);
        let node = &self.nodes[v];
        let views = model.graph().neighbors(v).iter().zip(&node.hist).map(|(&u, hist)| {
            let updates = schedule.node(u);
            (u, knowledge(t, v, u, &updates.times, &updates.proposals, hist))
        });

        let th = if model.has_edge_factors() {
            let (mut lo, mut hi) = (1.0, 1.0);
            for (u, view) in views {
                let (a, b) = match view {
                    Knowledge::Known(s) => factor_range(model, v, u, current, proposal, std::iter::once(s)),
                    Knowledge::Open { last, pending } => factor_range(
                        model,
                        v,
                        u,
                        current,
                        proposal,
                        std::iter::once(last).chain(pending.iter().copied()),
                    ),
                };
                lo *= a;
                hi *= b;
            }
            Thresholds {
                min_accept: lo.min(1.0),
                max_accept: hi.min(1.0),
            }
        } else {
            let mut sets = std::mem::take(&mut self.scratch);
            fill_sets(&mut sets, views);
            let th = thresholds_by_enumeration(model, v, current, proposal, &sets);
            self.scratch = sets;
            th?
        };

        if cfg!(debug_assertions) && matches!(model.kind(), ModelKind::Coloring) {
            let node = &self.nodes[v];
            let mut sets = Vec::new();
            fill_sets(
                &mut sets,
                model.graph().neighbors(v).iter().zip(&node.hist).map(|(&u, hist)| {
                    let updates = schedule.node(u);
                    (u, knowledge(t, v, u, &updates.times, &updates.proposals, hist))
                }),
            );
            let cond = coloring_conditions(proposal, &sets);
            debug_assert_eq!(cond.certain_accept, th.min_accept == 1.0, "coloring accept condition at {id:?}");
            debug_assert_eq!(cond.certain_reject, th.max_accept == 0.0, "coloring reject condition at {id:?}");
        }
        Ok(th)
    }

    fn finish(mut self) -> Result<SimOutput> {
        let stuck: Vec<usize> = (0..self.nodes.len()).filter(|&v| !self.nodes[v].halted).collect();
        if !stuck.is_empty() {
            return Err(Error::Deadlock(self.dump(&stuck)));
        }
        self.stats.message_count = self.stats.phase_one_messages + self.stats.decision_messages;
        self.stats.finish_times();
        let final_config = Configuration::new(self.nodes.iter().map(|n| n.value).collect());
        let node_count = self.nodes.len();
        Ok(SimOutput {
            final_config,
            stats: self.stats,
            trace: self.trace.map(|events| Trace { node_count, events }),
        })
    }

    fn dump(&self, stuck: &[usize]) -> String {
        let mut out = format!("{} node(s) did not terminate at vtime {}", stuck.len(), self.now);
        for &v in stuck.iter().take(20) {
            let node = &self.nodes[v];
            let progress: Vec<usize> = node.hist.iter().map(Vec::len).collect();
            let _ = write!(
                out,
                "\n  node {v}: phase {}, update {}/{}, lists missing {}, j = {:?}, thresholds {:?}",
                if node.in_phase_two { 2 } else { 1 },
                node.next,
                self.schedule.update_count(v),
                node.lists_missing,
                progress,
                node.last_thresholds,
            );
        }
        out
    }
}

fn fill_sets<'k>(sets: &mut Vec<Vec<State>>, views: impl Iterator<Item = (usize, Knowledge<'k>)>) {
    sets.clear();
    for (_, view) in views {
        let mut set = Vec::new();
        view.for_each(|s| set.push(s));
        set.sort_unstable();
        set.dedup();
        sets.push(set);
    }
}
