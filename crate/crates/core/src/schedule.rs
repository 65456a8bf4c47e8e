//! Shared randomness of the coupling: Poisson update times, proposals and
//! acceptance coins, consumed identically by the sequential oracle and the
//! distributed simulator.
//!
//! Each node draws from its own ChaCha stream keyed by the node id, so the
//! updates of a node depend only on `(seed, node)` and not on the rest of the
//! graph. Within a stream the order is: exponential gaps, then proposals,
//! then coins.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{invalid, Error, Result};
use crate::model::{SpinModel, State};

/// The `index`-th update (1-based) of `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UpdateId {
    pub node: usize,
    pub index: usize,
}

impl UpdateId {
    pub fn new(node: usize, index: usize) -> Self {
        UpdateId { node, index }
    }
}

/// Orders two update instants by `(time, node)`. Distinct updates of one node
/// have distinct times, so this is a strict total order on updates.
pub fn time_order(time_a: f64, node_a: usize, time_b: f64, node_b: usize) -> Ordering {
    time_a.total_cmp(&time_b).then(node_a.cmp(&node_b))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeUpdates {
    pub times: Vec<f64>,
    pub proposals: Vec<State>,
    pub coins: Vec<f64>,
}

impl NodeUpdates {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSchedule {
    horizon: f64,
    seed: u64,
    nodes: Vec<NodeUpdates>,
}

impl UpdateSchedule {
    /// Draws rate-1 Poisson update times on `(0, horizon)` for every node, with
    /// proposals from `nu_v` and uniform `[0, 1)` coins.
    pub fn generate(model: &SpinModel, horizon: f64, seed: u64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("time horizon must be finite and >= 0, got {horizon}")));
        }
        let nodes = (0..model.node_count())
            .map(|v| {
                let mut rng = node_stream(seed, v);
                let mut times = Vec::new();
                let mut t = 0.0f64;
                loop {
                    let next = t + rng.sample::<f64, _>(Exp1);
                    if next >= horizon {
                        break;
                    }
                    // a zero gap (or one lost to rounding) would tie two updates
                    if next > t {
                        times.push(next);
                        t = next;
                    }
                }
                let sampler = WeightedIndex::new(model.proposal(v)).map_err(|e| invalid(format!("proposal at node {v}: {e}")))?;
                let proposals = (0..times.len()).map(|_| sampler.sample(&mut rng) as State).collect();
                let coins = (0..times.len()).map(|_| rng.random::<f64>()).collect();
                Ok(NodeUpdates { times, proposals, coins })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UpdateSchedule { horizon, seed, nodes })
    }

    /// Assembles a schedule from explicit per-node updates.
    pub fn from_parts(horizon: f64, seed: u64, nodes: Vec<NodeUpdates>) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("time horizon must be finite and >= 0, got {horizon}")));
        }
        for (v, updates) in nodes.iter().enumerate() {
            let m = updates.times.len();
            if updates.proposals.len() != m || updates.coins.len() != m {
                return Err(invalid(format!("node {v}: times, proposals and coins differ in length")));
            }
            if updates.times.iter().any(|&t| !(t > 0.0 && t < horizon)) {
                return Err(invalid(format!("node {v}: update time outside (0, {horizon})")));
            }
            if updates.times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid(format!("node {v}: update times not strictly increasing")));
            }
            if updates.coins.iter().any(|&b| !(0.0..1.0).contains(&b)) {
                return Err(invalid(format!("node {v}: coin outside [0, 1)")));
            }
        }
        Ok(UpdateSchedule { horizon, seed, nodes })
    }

    /// Empty schedule: no node ever updates.
    pub fn empty(node_count: usize, horizon: f64) -> Self {
        UpdateSchedule {
            horizon,
            seed: 0,
            nodes: vec![NodeUpdates::default(); node_count],
        }
    }

    /// Checks node count and proposal range against a model.
    pub fn validate_for(&self, model: &SpinModel) -> Result<()> {
        if self.nodes.len() != model.node_count() {
            return Err(invalid(format!(
                "schedule has {} nodes, model has {}",
                self.nodes.len(),
                model.node_count()
            )));
        }
        let q = model.q() as State;
        for (v, updates) in self.nodes.iter().enumerate() {
            if updates.proposals.iter().any(|&c| c >= q) {
                return Err(invalid(format!("node {v}: proposal out of range for q = {q}")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, v: usize) -> &NodeUpdates {
        &self.nodes[v]
    }

    /// `m_v`.
    pub fn update_count(&self, v: usize) -> usize {
        self.nodes[v].len()
    }

    pub fn total_updates(&self) -> usize {
        self.nodes.iter().map(NodeUpdates::len).sum()
    }

    pub fn max_update_count(&self) -> usize {
        self.nodes.iter().map(NodeUpdates::len).max().unwrap_or(0)
    }

    pub fn time(&self, id: UpdateId) -> f64 {
        self.nodes[id.node].times[id.index - 1]
    }

    pub fn proposal(&self, id: UpdateId) -> State {
        self.nodes[id.node].proposals[id.index - 1]
    }

    pub fn coin(&self, id: UpdateId) -> f64 {
        self.nodes[id.node].coins[id.index - 1]
    }

    /// Overwrites one coin. Used to build tampered fixtures.
    pub fn set_coin(&mut self, id: UpdateId, coin: f64) -> Result<()> {
        if !(0.0..1.0).contains(&coin) {
            return Err(invalid(format!("coin {coin} outside [0, 1)")));
        }
        let slot = self
            .nodes
            .get_mut(id.node)
            .and_then(|n| n.coins.get_mut(id.index.wrapping_sub(1)))
            .ok_or_else(|| invalid(format!("no update {id:?}")))?;
        *slot = coin;
        Ok(())
    }

    /// Strict order on updates by `(time, node)`.
    pub fn compare(&self, a: UpdateId, b: UpdateId) -> Ordering {
        time_order(self.time(a), a.node, self.time(b), b.node).then(a.index.cmp(&b.index))
    }

    /// `a` strictly precedes `b`.
    pub fn precedes(&self, a: UpdateId, b: UpdateId) -> bool {
        self.compare(a, b) == Ordering::Less
    }

    /// All updates sorted by `(time, node)`.
    pub fn total_order(&self) -> Vec<UpdateId> {
        let mut ids: Vec<UpdateId> = self
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(v, u)| (1..=u.len()).map(move |i| UpdateId::new(v, i)))
            .collect();
        ids.sort_by(|&a, &b| self.compare(a, b));
        ids
    }

    /// Line-oriented dump: a header `n T seed`, then one
    /// `node index time proposal coin` line per update. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n T seed");
        let _ = writeln!(out, "{} {} {}", self.nodes.len(), self.horizon, self.seed);
        let _ = writeln!(out, "# node index time proposal coin");
        for (v, updates) in self.nodes.iter().enumerate() {
            for i in 0..updates.len() {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}",
                    v,
                    i + 1,
                    updates.times[i],
                    updates.proposals[i],
                    updates.coins[i]
                );
            }
        }
        out
    }

    /// Parses the format written by [`to_text`](Self::to_text).
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_line, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: header_line,
                msg: "header must be `n T seed`".into(),
            });
        }
        let n: usize = parse_field(fields[0], header_line)?;
        let horizon: f64 = parse_field(fields[1], header_line)?;
        let seed: u64 = parse_field(fields[2], header_line)?;

        let mut nodes = vec![NodeUpdates::default(); n];
        for (line, body) in lines {
            let f: Vec<&str> = body.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    line,
                    msg: "expected `node index time proposal coin`".into(),
                });
            }
            let v: usize = parse_field(f[0], line)?;
            let index: usize = parse_field(f[1], line)?;
            let node = nodes.get_mut(v).ok_or_else(|| Error::Parse {
                line,
                msg: format!("node {v} out of range"),
            })?;
            if index != node.len() + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("node {v}: expected index {}, got {index}", node.len() + 1),
                });
            }
            node.times.push(parse_field(f[2], line)?);
            node.proposals.push(parse_field(f[3], line)?);
            node.coins.push(parse_field(f[4], line)?);
        }
        Self::from_parts(horizon, seed, nodes)
    }
}

fn parse_field<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {token:?}"),
    })
}

fn node_stream(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Graph;
    use proptest::prelude::*;

    fn coloring(n: usize) -> SpinModel {
        SpinModel::coloring(Graph::empty(n), 4).unwrap()
    }

    #[test]
    fn zero_horizon_is_empty() {
        let s = UpdateSchedule::generate(&coloring(50), 0.0, 1).unwrap();
        assert_eq!(s.total_updates(), 0);
        assert!(s.total_order().is_empty());
    }

    #[test]
    fn negative_horizon_rejected() {
        assert!(matches!(
            UpdateSchedule::generate(&coloring(3), -1.0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = coloring(20);
        let a = UpdateSchedule::generate(&m, 5.0, 42).unwrap();
        let b = UpdateSchedule::generate(&m, 5.0, 42).unwrap();
        assert_eq!(a, b);
        let c = UpdateSchedule::generate(&m, 5.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn node_streams_independent_of_graph_size() {
        let small = UpdateSchedule::generate(&coloring(3), 8.0, 5).unwrap();
        let large = UpdateSchedule::generate(&coloring(300), 8.0, 5).unwrap();
        for v in 0..3 {
            assert_eq!(small.node(v), large.node(v));
        }
    }

    #[test]
    fn mean_update_count_matches_horizon() {
        // Pois(10) averaged over 1000 nodes: sd of the mean is 0.1.
        let s = UpdateSchedule::generate(&coloring(1000), 10.0, 2024).unwrap();
        let mean = s.total_updates() as f64 / 1000.0;
        assert!((mean - 10.0).abs() <= 0.5, "mean {mean}");
    }

    #[test]
    fn total_order_sorts_by_time_then_node() {
        let nodes = vec![
            NodeUpdates {
                times: vec![0.5],
                proposals: vec![0],
                coins: vec![0.1],
            },
            NodeUpdates {
                times: vec![0.3, 0.7],
                proposals: vec![1, 2],
                coins: vec![0.2, 0.3],
            },
        ];
        let s = UpdateSchedule::from_parts(1.0, 0, nodes).unwrap();
        assert_eq!(
            s.total_order(),
            vec![UpdateId::new(1, 1), UpdateId::new(0, 1), UpdateId::new(1, 2)]
        );
    }

    #[test]
    fn exact_time_ties_break_by_node() {
        let mut nodes = vec![NodeUpdates::default(); 8];
        for v in [7, 3] {
            nodes[v] = NodeUpdates {
                times: vec![0.5],
                proposals: vec![0],
                coins: vec![0.0],
            };
        }
        let s = UpdateSchedule::from_parts(1.0, 0, nodes).unwrap();
        assert_eq!(s.total_order(), vec![UpdateId::new(3, 1), UpdateId::new(7, 1)]);
        assert!(s.precedes(UpdateId::new(3, 1), UpdateId::new(7, 1)));
    }

    #[test]
    fn from_parts_validation() {
        let bad_time = NodeUpdates {
            times: vec![1.5],
            proposals: vec![0],
            coins: vec![0.5],
        };
        assert!(UpdateSchedule::from_parts(1.0, 0, vec![bad_time]).is_err());
        let unsorted = NodeUpdates {
            times: vec![0.5, 0.2],
            proposals: vec![0, 0],
            coins: vec![0.5, 0.5],
        };
        assert!(UpdateSchedule::from_parts(1.0, 0, vec![unsorted]).is_err());
        let bad_coin = NodeUpdates {
            times: vec![0.5],
            proposals: vec![0],
            coins: vec![1.0],
        };
        assert!(UpdateSchedule::from_parts(1.0, 0, vec![bad_coin]).is_err());
    }

    #[test]
    fn text_format_round_trips() {
        let m = SpinModel::hardcore(Graph::cycle(6).unwrap(), 0.4).unwrap();
        let s = UpdateSchedule::generate(&m, 3.0, 77).unwrap();
        let parsed = UpdateSchedule::parse_text(&s.to_text()).unwrap();
        assert_eq!(parsed, s);
        parsed.validate_for(&m).unwrap();
        assert!(UpdateSchedule::parse_text("2 1.0 0\n0 2 0.5 0 0.1\n").is_err());
        assert!(UpdateSchedule::parse_text("").is_err());
    }

    #[test]
    fn set_coin_bounds() {
        let m = coloring(2);
        let mut s = UpdateSchedule::generate(&m, 20.0, 3).unwrap();
        let id = UpdateId::new(0, 1);
        s.set_coin(id, 0.25).unwrap();
        assert_eq!(s.coin(id), 0.25);
        assert!(s.set_coin(id, 1.0).is_err());
        assert!(s.set_coin(UpdateId::new(0, 0), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn generated_schedules_are_well_formed(seed in any::<u64>(), horizon in 0.0f64..30.0) {
            let m = SpinModel::hardcore(Graph::cycle(5).unwrap(), 0.5).unwrap();
            let s = UpdateSchedule::generate(&m, horizon, seed).unwrap();
            for v in 0..5 {
                let node = s.node(v);
                prop_assert!(node.times.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(node.times.iter().all(|&t| t > 0.0 && t < horizon));
                prop_assert!(node.coins.iter().all(|&b| (0.0..1.0).contains(&b)));
                prop_assert!(node.proposals.iter().all(|&c| c < 2));
            }
            // restricting the total order to one node gives 1..m_v
            let order = s.total_order();
            for v in 0..5 {
                let idx: Vec<usize> = order.iter().filter(|id| id.node == v).map(|id| id.index).collect();
                prop_assert_eq!(idx, (1..=s.update_count(v)).collect::<Vec<_>>());
            }
            prop_assert!(order.windows(2).all(|w| s.precedes(w[0], w[1])));
        }
    }
}
