use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// What a delay policy gets to see about a message being put on a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageMeta {
    pub src: usize,
    pub dst: usize,
    pub send_vtime: f64,
    /// Per-channel sequence number, starting at 0.
    pub seq: u64,
    pub is_decision: bool,
}

/// Chooses the delay of every message. Delays must lie in `(0, 1]`.
pub trait DelayPolicy: fmt::Debug {
    fn delay(&mut self, msg: &MessageMeta) -> f64;
}

/// Per-directed-channel delays with a default for unlisted channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDelays {
    default: f64,
    channels: BTreeMap<(usize, usize), f64>,
}

impl FixedDelays {
    pub fn new(default: f64) -> Result<Self> {
        check_delay(default)?;
        Ok(FixedDelays {
            default,
            channels: BTreeMap::new(),
        })
    }

    pub fn with_channel(mut self, src: usize, dst: usize, delay: f64) -> Result<Self> {
        check_delay(delay)?;
        self.channels.insert((src, dst), delay);
        Ok(self)
    }

    pub fn get(&self, src: usize, dst: usize) -> f64 {
        self.channels.get(&(src, dst)).copied().unwrap_or(self.default)
    }
}

fn check_delay(delay: f64) -> Result<()> {
    if delay > 0.0 && delay <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delay {delay} outside (0, 1]")))
    }
}

/// Built-in delay policies.
///
/// `Synchronous` and `AdversarialMax` currently produce the same delays (every
/// message takes one full time unit); they are kept apart so an adaptive
/// worst-case policy can replace the latter.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheduler {
    Synchronous,
    UniformRandom { seed: u64 },
    AdversarialMax,
    Fixed(FixedDelays),
}

impl Scheduler {
    pub fn name(&self) -> &'static str {
        match self {
            Scheduler::Synchronous => "synchronous",
            Scheduler::UniformRandom { .. } => "uniform",
            Scheduler::AdversarialMax => "adversarial",
            Scheduler::Fixed(_) => "fixed",
        }
    }

    pub fn policy(&self) -> Box<dyn DelayPolicy> {
        match self {
            Scheduler::Synchronous | Scheduler::AdversarialMax => Box::new(ConstantDelay),
            Scheduler::UniformRandom { seed } => Box::new(UniformDelay {
                rng: ChaCha8Rng::seed_from_u64(*seed),
            }),
            Scheduler::Fixed(table) => Box::new(table.clone()),
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `synchronous`, `adversarial` or `uniform` (seed 0).
impl FromStr for Scheduler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synchronous" | "sync" => Ok(Scheduler::Synchronous),
            "uniform" | "uniform-random" => Ok(Scheduler::UniformRandom { seed: 0 }),
            "adversarial" | "adversarial-max" => Ok(Scheduler::AdversarialMax),
            other => Err(invalid(format!("unknown scheduler `{other}`"))),
        }
    }
}

#[derive(Debug)]
struct ConstantDelay;

impl DelayPolicy for ConstantDelay {
    fn delay(&mut self, _: &MessageMeta) -> f64 {
        1.0
    }
}

#[derive(Debug)]
struct UniformDelay {
    rng: ChaCha8Rng,
}

impl DelayPolicy for UniformDelay {
    fn delay(&mut self, _: &MessageMeta) -> f64 {
        // random::<f64>() is in [0, 1)
        1.0 - self.rng.random::<f64>()
    }
}

impl DelayPolicy for FixedDelays {
    fn delay(&mut self, msg: &MessageMeta) -> f64 {
        self.get(msg.src, msg.dst)
    }
}
