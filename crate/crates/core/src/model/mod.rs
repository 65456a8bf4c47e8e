//! Graphical models as Metropolis samplers: a graph, per-node proposal
//! distributions and local acceptance filters.
//!
//! States are integers `0..q`. The Ising model uses the fixed encoding
//! `0 <-> -1`, `1 <-> +1`.
//!
//! Every built-in filter factorizes over edges as
//! `f(tau) = min(1, prod_u g_u(tau_u))`. The canonical evaluation
//! ([`SpinModel::filter`]) folds those edge factors in neighbor order, which
//! makes the closed-form acceptance thresholds bit-identical to exhaustive
//! enumeration. [`SpinModel::direct_filter`] evaluates the textbook formula
//! instead and serves as an independent check.

mod graph;
mod lipschitz;

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

pub use graph::Graph;
pub use lipschitz::{lipschitz_bound, LipschitzMode, EXACT_ENUMERATION_LIMIT};

use crate::error::{invalid, Result};

/// A single-site value in `0..q`.
pub type State = u32;

const PROPOSAL_SUM_TOLERANCE: f64 = 1e-12;

/// User-supplied Metropolis filter.
///
/// Implementations must be total: every neighborhood assignment, legal or
/// not, maps to a value in `[0, 1]`.
pub trait LocalFilter: Send + Sync + fmt::Debug {
    /// `f^v_{c,c'}(tau)` where `tau[k]` is the state of `neighbors[k]`.
    fn accept_probability(
        &self,
        v: usize,
        current: State,
        proposal: State,
        neighbors: &[usize],
        tau: &[State],
    ) -> f64;

    /// Per-edge factor `f^{v,u}_{c,c'}(b) >= 0`, required when
    /// [`has_edge_factors`](Self::has_edge_factors) returns true. The filter
    /// must then equal `min(1, prod_u factor(u, tau_u))`.
    fn edge_factor(&self, _v: usize, _u: usize, _current: State, _proposal: State, _b: State) -> f64 {
        unreachable!("edge_factor called on a filter without edge factors")
    }

    fn has_edge_factors(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Coloring,
    Hardcore { lambda: f64 },
    Ising { beta: f64 },
    Custom(Arc<dyn LocalFilter>),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Coloring => "coloring",
            ModelKind::Hardcore { .. } => "hardcore",
            ModelKind::Ising { .. } => "ising",
            ModelKind::Custom(_) => "custom",
        }
    }
}

/// Graph plus proposals and filters. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpinModel {
    graph: Graph,
    q: usize,
    proposals: Vec<Vec<f64>>,
    kind: ModelKind,
    // exp(-2 beta), exp(2 beta) for the Ising edge factors.
    ising_factors: [f64; 2],
}

impl SpinModel {
    /// Uniform proposals, filter `prod_u 1[tau_u != c']`.
    pub fn coloring(graph: Graph, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(invalid("coloring needs q >= 1"));
        }
        let uniform = vec![1.0 / q as f64; q];
        Ok(Self::build(graph, q, uniform, ModelKind::Coloring))
    }

    /// Proposals `(1/(1+lambda), lambda/(1+lambda))`, filter `prod_u 1[tau_u + c' <= 1]`.
    pub fn hardcore(graph: Graph, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("hardcore fugacity must be finite and >= 0, got {lambda}")));
        }
        let nu = vec![1.0 / (1.0 + lambda), lambda / (1.0 + lambda)];
        Ok(Self::build(graph, 2, nu, ModelKind::Hardcore { lambda }))
    }

    /// Uniform proposals over `{-1, +1}`, filter
    /// `exp(min(0, beta (c' - c) sum_u tau_u))`.
    pub fn ising(graph: Graph, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(invalid(format!("Ising beta must be finite, got {beta}")));
        }
        Ok(Self::build(graph, 2, vec![0.5, 0.5], ModelKind::Ising { beta }))
    }

    /// Arbitrary filter with per-node proposal vectors.
    pub fn custom(graph: Graph, q: usize, proposals: Vec<Vec<f64>>, filter: Arc<dyn LocalFilter>) -> Result<Self> {
        if q == 0 {
            return Err(invalid("custom model needs q >= 1"));
        }
        if proposals.len() != graph.node_count() {
            return Err(invalid(format!(
                "{} proposal vectors for {} nodes",
                proposals.len(),
                graph.node_count()
            )));
        }
        for (v, nu) in proposals.iter().enumerate() {
            validate_distribution(nu, q).map_err(|e| invalid(format!("proposal at node {v}: {e}")))?;
        }
        Ok(SpinModel {
            graph,
            q,
            proposals,
            kind: ModelKind::Custom(filter),
            ising_factors: [1.0, 1.0],
        })
    }

    fn build(graph: Graph, q: usize, nu: Vec<f64>, kind: ModelKind) -> Self {
        let ising_factors = match kind {
            ModelKind::Ising { beta } => [(-2.0 * beta).exp(), (2.0 * beta).exp()],
            _ => [1.0, 1.0],
        };
        let proposals = vec![nu; graph.node_count()];
        SpinModel {
            graph,
            q,
            proposals,
            kind,
            ising_factors,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn proposal(&self, v: usize) -> &[f64] {
        &self.proposals[v]
    }

    pub fn has_edge_factors(&self) -> bool {
        match &self.kind {
            ModelKind::Custom(f) => f.has_edge_factors(),
            _ => true,
        }
    }

    /// `f^{v,u}_{c,c'}(b)`, or `None` when the filter does not factorize.
    pub fn edge_factor(&self, v: usize, u: usize, current: State, proposal: State, b: State) -> Option<f64> {
        let value = match &self.kind {
            ModelKind::Coloring => indicator(b != proposal),
            ModelKind::Hardcore { .. } => indicator(b + proposal <= 1),
            ModelKind::Ising { .. } => {
                let exponent = (spin(proposal) - spin(current)) * spin(b);
                match exponent {
                    0 => 1.0,
                    e if e > 0 => self.ising_factors[1],
                    _ => self.ising_factors[0],
                }
            }
            ModelKind::Custom(f) if f.has_edge_factors() => f.edge_factor(v, u, current, proposal, b),
            ModelKind::Custom(_) => return None,
        };
        Some(value)
    }

    /// Checked filter evaluation.
    pub fn filter_eval(&self, v: usize, current: State, proposal: State, tau: &[State]) -> Result<f64> {
        if v >= self.node_count() {
            return Err(invalid(format!("node {v} out of range")));
        }
        if tau.len() != self.graph.degree(v) {
            return Err(invalid(format!(
                "neighborhood assignment has {} entries, node {v} has {} neighbors",
                tau.len(),
                self.graph.degree(v)
            )));
        }
        let q = self.q as State;
        if current >= q || proposal >= q || tau.iter().any(|&s| s >= q) {
            return Err(invalid(format!("state out of range for q = {}", self.q)));
        }
        Ok(self.filter(v, current, proposal, tau))
    }

    /// `f^v_{c,c'}(tau)` without argument checks. For edge-factored models this
    /// is `min(1, prod)` folded in neighbor order.
    pub fn filter(&self, v: usize, current: State, proposal: State, tau: &[State]) -> f64 {
        match &self.kind {
            ModelKind::Custom(f) if !f.has_edge_factors() => {
                f.accept_probability(v, current, proposal, self.graph.neighbors(v), tau)
            }
            _ => {
                let product = self
                    .graph
                    .neighbors(v)
                    .iter()
                    .zip(tau)
                    .fold(1.0, |acc, (&u, &b)| {
                        acc * self.edge_factor(v, u, current, proposal, b).expect("edge-factored")
                    });
                product.min(1.0)
            }
        }
    }

    /// The filter evaluated from its closed formula rather than from edge
    /// factors. Agrees with [`filter`](Self::filter) up to rounding.
    pub fn direct_filter(&self, v: usize, current: State, proposal: State, tau: &[State]) -> f64 {
        match &self.kind {
            ModelKind::Coloring => indicator(tau.iter().all(|&b| b != proposal)),
            ModelKind::Hardcore { .. } => indicator(tau.iter().all(|&b| b + proposal <= 1)),
            ModelKind::Ising { beta } => {
                let field: i32 = tau.iter().map(|&b| spin(b)).sum();
                let delta = spin(proposal) - spin(current);
                (beta * f64::from(delta * field)).min(0.0).exp()
            }
            ModelKind::Custom(f) => f.accept_probability(v, current, proposal, self.graph.neighbors(v), tau),
        }
    }

    /// Checks length and range of a configuration against this model.
    pub fn validate_configuration(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.node_count() {
            return Err(invalid(format!(
                "configuration has {} entries, model has {} nodes",
                config.len(),
                self.node_count()
            )));
        }
        if let Some((v, &s)) = config.values().iter().enumerate().find(|(_, &s)| s as usize >= self.q) {
            return Err(invalid(format!("node {v} has state {s}, q = {}", self.q)));
        }
        Ok(())
    }

    /// True when no edge joins two nodes in the same state.
    pub fn is_proper_coloring(&self, config: &Configuration) -> bool {
        self.graph.edges().all(|(u, v)| config[u] != config[v])
    }
}

/// Ising spin of an encoded state.
pub fn spin(s: State) -> i32 {
    if s == 0 {
        -1
    } else {
        1
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn validate_distribution(nu: &[f64], q: usize) -> std::result::Result<(), String> {
    if nu.len() != q {
        return Err(format!("{} entries for q = {q}", nu.len()));
    }
    if nu.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err("entries must be finite and non-negative".into());
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > PROPOSAL_SUM_TOLERANCE {
        return Err(format!("entries sum to {total}"));
    }
    Ok(())
}

/// Pairwise model with strictly positive interaction weights `w[a][b]`. The
/// Metropolis filter of the distribution `prod_{uv} w[x_u][x_v]` is
/// `min(1, prod_u w[c'][tau_u] / w[c][tau_u])`.
#[derive(Debug, Clone)]
pub struct PairwiseFilter {
    q: usize,
    weights: Vec<f64>,
}

impl PairwiseFilter {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let q = weights.len();
        if q == 0 || weights.iter().any(|row| row.len() != q) {
            return Err(invalid("pairwise weights must be a non-empty square matrix"));
        }
        if weights.iter().flatten().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(invalid("pairwise weights must be finite and strictly positive"));
        }
        Ok(PairwiseFilter {
            q,
            weights: weights.into_iter().flatten().collect(),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn weight(&self, a: State, b: State) -> f64 {
        self.weights[a as usize * self.q + b as usize]
    }
}

impl LocalFilter for PairwiseFilter {
    fn accept_probability(&self, _v: usize, current: State, proposal: State, _: &[usize], tau: &[State]) -> f64 {
        let log_ratio: f64 = tau
            .iter()
            .map(|&b| self.weight(proposal, b).ln() - self.weight(current, b).ln())
            .sum();
        log_ratio.min(0.0).exp()
    }

    fn edge_factor(&self, _v: usize, _u: usize, current: State, proposal: State, b: State) -> f64 {
        self.weight(proposal, b) / self.weight(current, b)
    }

    fn has_edge_factors(&self) -> bool {
        true
    }
}

/// A length-`n` assignment of states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration(Vec<State>);

impl Configuration {
    pub fn new(values: Vec<State>) -> Self {
        Configuration(values)
    }

    pub fn constant(n: usize, state: State) -> Self {
        Configuration(vec![state; n])
    }

    pub fn values(&self) -> &[State] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [State] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<State> {
        self.0
    }
}

impl Index<usize> for Configuration {
    type Output = State;

    fn index(&self, v: usize) -> &State {
        &self.0[v]
    }
}

impl From<Vec<State>> for Configuration {
    fn from(values: Vec<State>) -> Self {
        Configuration(values)
    }
}
