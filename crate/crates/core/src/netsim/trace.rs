use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::schedule::UpdateId;

/// How a resolution came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// The first threshold test for the update already decided it.
    SelfTriggered,
    /// The update was decided right after learning the outcome of this update.
    TriggeredBy(UpdateId),
}

/// Payload of a message on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireMessage {
    /// Frame `frame` (1-based) of the `frames` frames carrying one
    /// phase-one message.
    Info { frame: usize, frames: usize, bits: u64 },
    Decision { accept: bool, bits: u64 },
}

impl WireMessage {
    pub fn bits(&self) -> u64 {
        match *self {
            WireMessage::Info { bits, .. } | WireMessage::Decision { bits, .. } => bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceKind {
    Send { src: usize, dst: usize, msg: WireMessage },
    Deliver { src: usize, dst: usize, msg: WireMessage },
    EnterPhaseTwo { node: usize },
    Resolve { update: UpdateId, accepted: bool, trigger: Trigger },
    Halt { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub vtime: f64,
    pub kind: TraceKind,
}

/// Event log of one simulation, in processing order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub node_count: usize,
    pub events: Vec<TraceEvent>,
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WireMessage::Info { frame, frames, bits } => write!(f, "info/{frame}/{frames}/{bits}"),
            WireMessage::Decision { accept, bits } => {
                write!(f, "{}/{bits}", if accept { "accept" } else { "reject" })
            }
        }
    }
}

impl Trace {
    /// One `vtime kind src dst payload` line per event after a `# n` header.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n {}", self.node_count);
        for e in &self.events {
            let t = e.vtime;
            let _ = match e.kind {
                TraceKind::Send { src, dst, msg } => writeln!(out, "{t} send {src} {dst} {msg}"),
                TraceKind::Deliver { src, dst, msg } => writeln!(out, "{t} deliver {src} {dst} {msg}"),
                TraceKind::EnterPhaseTwo { node } => writeln!(out, "{t} enter2 {node} {node} -"),
                TraceKind::Halt { node } => writeln!(out, "{t} halt {node} {node} -"),
                TraceKind::Resolve {
                    update,
                    accepted,
                    trigger,
                } => {
                    let verdict = if accepted { "accept" } else { "reject" };
                    let node = update.node;
                    let index = update.index;
                    match trigger {
                        Trigger::SelfTriggered => writeln!(out, "{t} resolve {node} {node} {index}/{verdict}/self"),
                        Trigger::TriggeredBy(by) => writeln!(
                            out,
                            "{t} resolve {} {node} {index}/{verdict}/{}.{}",
                            by.node, by.node, by.index
                        ),
                    }
                }
            };
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut node_count = None;
        let mut events = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line_no = k + 1;
            let err = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("n") {
                    let n = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| err("bad node count"))?;
                    node_count = Some(n);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [vtime, kind, src, dst, payload] = fields[..] else {
                return Err(err("expected `vtime kind src dst payload`"));
            };
            let vtime: f64 = vtime.parse().map_err(|_| err("bad vtime"))?;
            let src: usize = src.parse().map_err(|_| err("bad src"))?;
            let dst: usize = dst.parse().map_err(|_| err("bad dst"))?;
            let kind = match kind {
                "send" | "deliver" => {
                    let msg = parse_message(payload).ok_or_else(|| err("bad message payload"))?;
                    if kind == "send" {
                        TraceKind::Send { src, dst, msg }
                    } else {
                        TraceKind::Deliver { src, dst, msg }
                    }
                }
                "enter2" => TraceKind::EnterPhaseTwo { node: dst },
                "halt" => TraceKind::Halt { node: dst },
                "resolve" => {
                    let parts: Vec<&str> = payload.split('/').collect();
                    let [index, verdict, trigger] = parts[..] else {
                        return Err(err("bad resolve payload"));
                    };
                    let index = index.parse().map_err(|_| err("bad update index"))?;
                    let accepted = parse_verdict(verdict).ok_or_else(|| err("bad verdict"))?;
                    let trigger = if trigger == "self" {
                        Trigger::SelfTriggered
                    } else {
                        let (n, i) = trigger.split_once('.').ok_or_else(|| err("bad trigger"))?;
                        let by = UpdateId::new(
                            n.parse().map_err(|_| err("bad trigger node"))?,
                            i.parse().map_err(|_| err("bad trigger index"))?,
                        );
                        Trigger::TriggeredBy(by)
                    };
                    TraceKind::Resolve {
                        update: UpdateId::new(dst, index),
                        accepted,
                        trigger,
                    }
                }
                _ => return Err(err("unknown event kind")),
            };
            events.push(TraceEvent { vtime, kind });
        }
        let node_count = node_count.ok_or(Error::Parse {
            line: 1,
            msg: "missing `# n` header".into(),
        })?;
        Ok(Trace { node_count, events })
    }
}

fn parse_verdict(s: &str) -> Option<bool> {
    match s {
        "accept" => Some(true),
        "reject" => Some(false),
        _ => None,
    }
}

fn parse_message(s: &str) -> Option<WireMessage> {
    let parts: Vec<&str> = s.split('/').collect();
    match parts[..] {
        ["info", frame, frames, bits] => Some(WireMessage::Info {
            frame: frame.parse().ok()?,
            frames: frames.parse().ok()?,
            bits: bits.parse().ok()?,
        }),
        [verdict, bits] => Some(WireMessage::Decision {
            accept: parse_verdict(verdict)?,
            bits: bits.parse().ok()?,
        }),
        _ => None,
    }
}

/// Summary of one run. All times are virtual times in message time units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunStats {
    /// Latest termination of any node.
    pub makespan: f64,
    /// The moment every node has entered Phase II.
    pub phase1_end: f64,
    pub phase2_entry: Vec<f64>,
    pub termination: Vec<f64>,
    /// `R_v = max(0, termination_v - phase1_end)`.
    pub residence: Vec<f64>,
    /// Phase-one messages plus decisions.
    pub message_count: u64,
    pub phase_one_messages: u64,
    pub decision_messages: u64,
    /// Wire frames used by phase-one messages.
    pub frame_count: u64,
    pub total_bits: u64,
    pub max_message_bits: u64,
}

impl RunStats {
    pub fn max_residence(&self) -> f64 {
        self.residence.iter().copied().fold(0.0, f64::max)
    }

    /// Recomputes the statistics from a trace alone.
    pub fn from_trace(trace: &Trace) -> Result<Self> {
        let n = trace.node_count;
        let mut stats = RunStats {
            phase2_entry: vec![f64::NAN; n],
            termination: vec![f64::NAN; n],
            ..RunStats::default()
        };
        let node_err = |v: usize| Error::Invariant(format!("trace names node {v} but n = {n}"));
        for e in &trace.events {
            match e.kind {
                TraceKind::Send { msg, .. } => {
                    match msg {
                        WireMessage::Info { frame, .. } => {
                            stats.frame_count += 1;
                            if frame == 1 {
                                stats.phase_one_messages += 1;
                            }
                        }
                        WireMessage::Decision { .. } => stats.decision_messages += 1,
                    }
                    stats.total_bits += msg.bits();
                    stats.max_message_bits = stats.max_message_bits.max(msg.bits());
                }
                TraceKind::EnterPhaseTwo { node } => *stats.phase2_entry.get_mut(node).ok_or_else(|| node_err(node))? = e.vtime,
                TraceKind::Halt { node } => *stats.termination.get_mut(node).ok_or_else(|| node_err(node))? = e.vtime,
                TraceKind::Deliver { .. } | TraceKind::Resolve { .. } => {}
            }
        }
        if let Some(v) = (0..n).find(|&v| stats.termination[v].is_nan() || stats.phase2_entry[v].is_nan()) {
            return Err(Error::Invariant(format!("trace has no phase-two entry or halt for node {v}")));
        }
        stats.message_count = stats.phase_one_messages + stats.decision_messages;
        stats.finish_times();
        Ok(stats)
    }

    pub(crate) fn finish_times(&mut self) {
        self.phase1_end = self.phase2_entry.iter().copied().fold(0.0, f64::max);
        self.makespan = self.termination.iter().copied().fold(self.phase1_end, f64::max);
        let start = self.phase1_end;
        self.residence = self.termination.iter().map(|&t| (t - start).max(0.0)).collect();
    }
}

/// Bit sizes charged to messages. `L(x) = ceil(log2 x)`.
///
/// A phase-one frame carries a header (source, destination, last-frame flag:
/// `2 L(n) + 1`), the initial value on the first frame (`L(q)`), and one update
/// (time as `L(ceil(T) + 1)` integer bits plus `2 L(n)` fractional bits, and a
/// proposal of `L(q)` bits). A decision costs one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitCosts {
    log_n: u64,
    log_t: u64,
    log_q: u64,
}

impl BitCosts {
    pub fn new(n: usize, horizon: f64, q: usize) -> Self {
        BitCosts {
            log_n: ceil_log2(n as u64),
            log_t: ceil_log2(horizon.ceil() as u64 + 1),
            log_q: ceil_log2(q as u64),
        }
    }

    pub fn info_frame(&self, first: bool, carries_update: bool) -> u64 {
        let mut bits = 2 * self.log_n + 1;
        if first {
            bits += self.log_q;
        }
        if carries_update {
            bits += self.log_t + 2 * self.log_n + self.log_q;
        }
        bits
    }

    pub fn decision(&self) -> u64 {
        1
    }

    /// `4 (L(n) + L(ceil(T) + 1) + L(q)) + 1`, an upper bound on every message.
    pub fn budget(&self) -> u64 {
        4 * (self.log_n + self.log_t + self.log_q) + 1
    }
}

pub fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        u64::from(64 - (x - 1).leading_zeros())
    }
}
