//! Possible states of a neighbor at a query time, and the acceptance and
//! rejection thresholds they induce.

use crate::error::{invalid, Error, Result};
use crate::model::{SpinModel, State};
use crate::schedule::time_order;

/// Largest neighborhood product enumerated by [`thresholds_by_enumeration`].
pub const ENUMERATION_LIMIT: usize = 10_000_000;

/// What `v` knows about neighbor `u` at a query time, given `u`'s resolved
/// history `hist_u = (Y_u^(0), ..., Y_u^(j_u - 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Knowledge<'a> {
    /// The value at the query time is already determined.
    Known(State),
    /// The last resolved value, or any of the still-unresolved proposals
    /// before the query time.
    Open { last: State, pending: &'a [State] },
}

impl Knowledge<'_> {
    pub(crate) fn for_each(&self, mut f: impl FnMut(State)) {
        match *self {
            Knowledge::Known(s) => f(s),
            Knowledge::Open { last, pending } => {
                f(last);
                pending.iter().copied().for_each(f);
            }
        }
    }
}

pub(crate) fn knowledge<'a>(
    query_time: f64,
    query_node: usize,
    u: usize,
    times_u: &[f64],
    proposals_u: &'a [State],
    hist_u: &[State],
) -> Knowledge<'a> {
    // number of u's updates strictly before the query in the (time, node) order
    let before = times_u.partition_point(|&t| time_order(t, u, query_time, query_node).is_lt());
    let j = hist_u.len();
    if before < j {
        Knowledge::Known(hist_u[before])
    } else {
        Knowledge::Open {
            last: hist_u[j - 1],
            pending: &proposals_u[j - 1..before],
        }
    }
}

/// `S_t(u)`: the values neighbor `u` may hold at time `query_time`, as seen by
/// `query_node`. `hist_u` holds the `j_u >= 1` resolved values of `u`. Returned
/// sorted and without duplicates.
pub fn possible_states(
    query_time: f64,
    query_node: usize,
    u: usize,
    times_u: &[f64],
    proposals_u: &[State],
    hist_u: &[State],
    horizon: f64,
) -> Result<Vec<State>> {
    if !(query_time < horizon) {
        return Err(invalid(format!("query time {query_time} is not below T = {horizon}")));
    }
    if hist_u.is_empty() || hist_u.len() > times_u.len() + 1 || times_u.len() != proposals_u.len() {
        return Err(invalid(format!(
            "history of length {} inconsistent with {} updates",
            hist_u.len(),
            times_u.len()
        )));
    }
    let mut out = Vec::new();
    knowledge(query_time, query_node, u, times_u, proposals_u, hist_u).for_each(|s| out.push(s));
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Extremes of the filter over every neighborhood configuration still possible.
/// `P_AC = min_accept` and `P_RE = 1 - max_accept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub min_accept: f64,
    pub max_accept: f64,
}

impl Thresholds {
    pub fn p_ac(&self) -> f64 {
        self.min_accept
    }

    pub fn p_re(&self) -> f64 {
        1.0 - self.max_accept
    }

    /// `Some(true)` if `beta < P_AC`, `Some(false)` if `beta >= 1 - P_RE`,
    /// `None` while undecided. The reject test is done against `max_accept`
    /// directly so that no rounding in `1 - (1 - x)` can open a gap.
    pub fn decide(&self, beta: f64) -> Option<bool> {
        if beta < self.min_accept {
            Some(true)
        } else if beta >= self.max_accept {
            Some(false)
        } else {
            None
        }
    }
}

fn check_sets<S: AsRef<[State]>>(model: &SpinModel, v: usize, sets: &[S]) -> Result<()> {
    if v >= model.node_count() || sets.len() != model.graph().degree(v) {
        return Err(invalid(format!("need one state set per neighbor of node {v}")));
    }
    if let Some(k) = sets.iter().position(|s| s.as_ref().is_empty()) {
        return Err(Error::Invariant(format!("empty possible-state set for neighbor slot {k} of node {v}")));
    }
    Ok(())
}

/// Thresholds through the cheapest exact route for the model.
pub fn thresholds<S: AsRef<[State]>>(
    model: &SpinModel,
    v: usize,
    current: State,
    proposal: State,
    sets: &[S],
) -> Result<Thresholds> {
    if model.has_edge_factors() {
        edge_factor_thresholds(model, v, current, proposal, sets)
    } else {
        thresholds_by_enumeration(model, v, current, proposal, sets)
    }
}

/// `min{1, prod_u min_b f^{v,u}(b)}` and `min{1, prod_u max_b f^{v,u}(b)}`.
pub fn edge_factor_thresholds<S: AsRef<[State]>>(
    model: &SpinModel,
    v: usize,
    current: State,
    proposal: State,
    sets: &[S],
) -> Result<Thresholds> {
    check_sets(model, v, sets)?;
    if !model.has_edge_factors() {
        return Err(Error::Unsupported("filter has no edge factorization".into()));
    }
    let mut lo = 1.0;
    let mut hi = 1.0;
    for (&u, set) in model.graph().neighbors(v).iter().zip(sets) {
        let (a, b) = factor_range(model, v, u, current, proposal, set.as_ref().iter().copied());
        lo *= a;
        hi *= b;
    }
    Ok(Thresholds {
        min_accept: lo.min(1.0),
        max_accept: hi.min(1.0),
    })
}

pub(crate) fn factor_range(
    model: &SpinModel,
    v: usize,
    u: usize,
    current: State,
    proposal: State,
    states: impl Iterator<Item = State>,
) -> (f64, f64) {
    states.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        let f = model.edge_factor(v, u, current, proposal, b).expect("edge-factored model");
        (lo.min(f), hi.max(f))
    })
}

/// Min and max of the filter over the full product of `sets`, evaluated with
/// the model's direct formula.
pub fn thresholds_by_enumeration<S: AsRef<[State]>>(
    model: &SpinModel,
    v: usize,
    current: State,
    proposal: State,
    sets: &[S],
) -> Result<Thresholds> {
    check_sets(model, v, sets)?;
    let size = sets
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.as_ref().len()))
        .filter(|&s| s <= ENUMERATION_LIMIT)
        .ok_or_else(|| Error::Unsupported(format!("neighborhood product exceeds {ENUMERATION_LIMIT}")))?;
    let mut digits = vec![0usize; sets.len()];
    let mut tau: Vec<State> = sets.iter().map(|s| s.as_ref()[0]).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for step in 0..size {
        if step > 0 {
            for (k, d) in digits.iter_mut().enumerate() {
                *d += 1;
                if *d < sets[k].as_ref().len() {
                    tau[k] = sets[k].as_ref()[*d];
                    break;
                }
                *d = 0;
                tau[k] = sets[k].as_ref()[0];
            }
        }
        let f = model.direct_filter(v, current, proposal, &tau);
        lo = lo.min(f);
        hi = hi.max(f);
    }
    Ok(Thresholds {
        min_accept: lo,
        max_accept: hi,
    })
}

/// The two resolution tests specialized to proper coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColoringConditions {
    /// The proposal is outside every possible-state set.
    pub certain_accept: bool,
    /// Some neighbor surely holds the proposal.
    pub certain_reject: bool,
}

pub fn coloring_conditions<S: AsRef<[State]>>(proposal: State, sets: &[S]) -> ColoringConditions {
    ColoringConditions {
        certain_accept: sets.iter().all(|s| !s.as_ref().contains(&proposal)),
        certain_reject: sets.iter().any(|s| s.as_ref() == [proposal]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Graph;

    const T: f64 = 1.0;

    #[test]
    fn possible_states_examples() {
        let times = [0.2, 0.4];
        let props = [5, 7];
        // nothing before the query
        assert_eq!(possible_states(0.1, 0, 1, &times, &props, &[2], T).unwrap(), vec![2]);
        // nothing resolved yet, both updates before t
        assert_eq!(possible_states(0.5, 0, 1, &times, &props, &[2], T).unwrap(), vec![2, 5, 7]);
        // both resolved: accepted then rejected
        assert_eq!(possible_states(0.5, 0, 1, &times, &props, &[2, 5, 5], T).unwrap(), vec![5]);
        // first resolved (rejected), second pending
        assert_eq!(possible_states(0.5, 0, 1, &times, &props, &[2, 2], T).unwrap(), vec![2, 7]);
        // query between the two updates, first one still open
        assert_eq!(possible_states(0.3, 0, 1, &times, &props, &[2], T).unwrap(), vec![2, 5]);
    }

    #[test]
    fn possible_states_tie_breaks_by_node() {
        let times = [0.5];
        let props = [3];
        // u = 1 at time 0.5 precedes node 2 querying at 0.5, but not node 0
        assert_eq!(possible_states(0.5, 2, 1, &times, &props, &[0], T).unwrap(), vec![0, 3]);
        assert_eq!(possible_states(0.5, 0, 1, &times, &props, &[0], T).unwrap(), vec![0]);
    }

    #[test]
    fn possible_states_errors() {
        assert!(possible_states(1.0, 0, 1, &[], &[], &[0], T).is_err());
        assert!(possible_states(0.5, 0, 1, &[0.1], &[1], &[], T).is_err());
    }

    fn star_coloring(q: usize) -> SpinModel {
        SpinModel::coloring(Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap(), q).unwrap()
    }

    #[test]
    fn coloring_threshold_examples() {
        let m = star_coloring(5);
        let sets = [vec![1, 3], vec![2]];
        let check = |proposal, p_ac, p_re| {
            let a = edge_factor_thresholds(&m, 0, 0, proposal, &sets).unwrap();
            let b = thresholds_by_enumeration(&m, 0, 0, proposal, &sets).unwrap();
            assert_eq!((a.p_ac(), a.p_re()), (p_ac, p_re));
            assert_eq!(a, b);
        };
        check(3, 0.0, 0.0);
        check(4, 1.0, 0.0);
        check(2, 0.0, 1.0);
        let c = coloring_conditions(3, &sets);
        assert!(!c.certain_accept && !c.certain_reject);
        assert!(coloring_conditions(4, &sets).certain_accept);
        assert!(coloring_conditions(2, &sets).certain_reject);
    }

    #[test]
    fn singleton_sets_reproduce_filter() {
        let m = SpinModel::ising(Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap(), 0.4).unwrap();
        for tau in [[0, 0], [0, 1], [1, 1]] {
            let sets = [vec![tau[0]], vec![tau[1]]];
            let th = thresholds(&m, 0, 0, 1, &sets).unwrap();
            assert_eq!(th.min_accept, m.filter(0, 0, 1, &tau));
            assert_eq!(th.p_ac() + th.p_re(), 1.0);
            assert!(th.decide(0.3).is_some());
        }
    }

    #[test]
    fn decide_is_exclusive() {
        let th = Thresholds {
            min_accept: 0.25,
            max_accept: 0.75,
        };
        assert_eq!(th.decide(0.1), Some(true));
        assert_eq!(th.decide(0.5), None);
        assert_eq!(th.decide(0.75), Some(false));
    }

    #[test]
    fn empty_set_is_invariant_violation() {
        let m = star_coloring(3);
        let sets: [Vec<State>; 2] = [vec![], vec![1]];
        assert!(matches!(thresholds(&m, 0, 0, 1, &sets), Err(Error::Invariant(_))));
    }
}
