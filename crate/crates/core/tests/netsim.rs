use std::sync::Arc;

use asyncmh_core::model::PairwiseFilter;
use asyncmh_core::netsim::{self, FixedDelays, Scheduler, Trace, TraceKind, Trigger};
use asyncmh_core::oracle::run_continuous;
use asyncmh_core::schedule::NodeUpdates;
use asyncmh_core::{Configuration, Graph, RunStats, SpinModel, UpdateId, UpdateSchedule};
use proptest::prelude::*;

fn schedulers(seed: u64) -> [Scheduler; 4] {
    [
        Scheduler::Synchronous,
        Scheduler::UniformRandom { seed },
        Scheduler::AdversarialMax,
        Scheduler::Fixed(
            FixedDelays::new(0.3)
                .unwrap()
                .with_channel(0, 1, 1.0)
                .unwrap()
                .with_channel(1, 0, 0.01)
                .unwrap(),
        ),
    ]
}

fn check_coupling(model: &SpinModel, y0: &Configuration, horizon: f64, seed: u64) {
    let schedule = UpdateSchedule::generate(model, horizon, seed).unwrap();
    let expected = run_continuous(model, &schedule, y0).unwrap().final_config;
    for s in schedulers(seed ^ 0x5eed) {
        let out = netsim::run(model, &schedule, y0, &s, true).unwrap();
        assert_eq!(out.final_config, expected, "seed {seed} scheduler {s}");
        let trace = out.trace.as_ref().unwrap();
        assert_eq!(RunStats::from_trace(trace).unwrap(), out.stats);
        check_message_counts(model, &schedule, &out.stats);
    }
}

fn check_message_counts(model: &SpinModel, schedule: &UpdateSchedule, stats: &RunStats) {
    let g = model.graph();
    let decisions: usize = (0..g.node_count()).map(|v| schedule.update_count(v) * g.degree(v)).sum();
    assert_eq!(stats.phase_one_messages, 2 * g.edge_count() as u64);
    assert_eq!(stats.decision_messages, decisions as u64);
    assert_eq!(stats.message_count, (2 * g.edge_count() + decisions) as u64);
    let budget = netsim::BitCosts::new(g.node_count(), schedule.horizon(), model.q()).budget();
    assert!(stats.max_message_bits <= budget);
    assert!(stats.makespan >= stats.phase1_end);
    assert!(stats.residence.iter().all(|&r| r >= 0.0));
}

#[test]
fn coupling_coloring_random_regular() {
    let g = Graph::random_regular(30, 4, 1).unwrap();
    let y0 = Configuration::new(g.greedy_coloring(8).unwrap());
    let m = SpinModel::coloring(g, 8).unwrap();
    for seed in 0..15 {
        check_coupling(&m, &y0, 5.0, seed);
    }
}

#[test]
fn coupling_tight_coloring_from_improper_start() {
    // q below Delta + 1 and a constant start: lots of unresolved waiting
    let m = SpinModel::coloring(Graph::grid(5, 5), 3).unwrap();
    let y0 = Configuration::constant(25, 0);
    for seed in 0..10 {
        check_coupling(&m, &y0, 4.0, seed);
    }
}

#[test]
fn coupling_hardcore_and_ising() {
    let hc = SpinModel::hardcore(Graph::grid(6, 6), 0.7).unwrap();
    let is = SpinModel::ising(Graph::cycle(20).unwrap(), 0.45).unwrap();
    for seed in 0..10 {
        check_coupling(&hc, &Configuration::constant(36, 0), 5.0, seed);
        check_coupling(&is, &Configuration::constant(20, 0), 5.0, seed);
    }
}

#[derive(Debug)]
struct OpaqueIsing(f64);

impl asyncmh_core::model::LocalFilter for OpaqueIsing {
    fn accept_probability(&self, _: usize, c: u32, c2: u32, _: &[usize], tau: &[u32]) -> f64 {
        let field: i32 = tau.iter().map(|&b| if b == 1 { 1 } else { -1 }).sum();
        let delta = (c2 as i32 - c as i32) * 2;
        (self.0 * f64::from(delta * field)).min(0.0).exp()
    }
}

#[test]
fn coupling_custom_models() {
    let g = Graph::random_regular(16, 3, 4).unwrap();
    let w = vec![vec![1.0, 0.2, 0.5], vec![0.2, 1.0, 0.3], vec![0.5, 0.3, 2.0]];
    let pairwise = SpinModel::custom(
        g.clone(),
        3,
        vec![vec![0.2, 0.3, 0.5]; 16],
        Arc::new(PairwiseFilter::new(w).unwrap()),
    )
    .unwrap();
    // a filter without edge factors goes through enumeration
    let opaque = SpinModel::custom(g, 2, vec![vec![0.5, 0.5]; 16], Arc::new(OpaqueIsing(0.3))).unwrap();
    for seed in 0..8 {
        check_coupling(&pairwise, &Configuration::constant(16, 2), 4.0, seed);
        check_coupling(&opaque, &Configuration::constant(16, 1), 4.0, seed);
    }
}

#[test]
fn empty_schedule_returns_initial() {
    let m = SpinModel::coloring(Graph::cycle(6).unwrap(), 3).unwrap();
    let y0 = Configuration::new(vec![0, 1, 2, 0, 1, 2]);
    let out = netsim::run(&m, &UpdateSchedule::empty(6, 3.0), &y0, &Scheduler::Synchronous, false).unwrap();
    assert_eq!(out.final_config, y0);
    assert_eq!(out.stats.makespan, out.stats.phase1_end);
    assert_eq!(out.stats.phase1_end, 1.0);
    assert_eq!(out.stats.max_residence(), 0.0);
}

#[test]
fn isolated_vertices_resolve_without_waiting() {
    let m = SpinModel::coloring(Graph::empty(5), 4).unwrap();
    let s = UpdateSchedule::generate(&m, 10.0, 3).unwrap();
    let out = netsim::run(&m, &s, &Configuration::constant(5, 0), &Scheduler::AdversarialMax, true).unwrap();
    assert_eq!(out.stats.makespan, 0.0);
    assert_eq!(out.stats.message_count, 0);
    let trace = out.trace.unwrap();
    for e in &trace.events {
        if let TraceKind::Resolve { trigger, .. } = e.kind {
            assert_eq!(trigger, Trigger::SelfTriggered);
        }
    }
}

fn two_node(times0: Vec<f64>, props0: Vec<u32>, coins0: Vec<f64>, times1: Vec<f64>, props1: Vec<u32>, coins1: Vec<f64>) -> UpdateSchedule {
    UpdateSchedule::from_parts(
        1.0,
        0,
        vec![
            NodeUpdates {
                times: times0,
                proposals: props0,
                coins: coins0,
            },
            NodeUpdates {
                times: times1,
                proposals: props1,
                coins: coins1,
            },
        ],
    )
    .unwrap()
}

#[test]
fn decisions_arriving_in_phase_one_are_queued() {
    // path 0 - 1 - 2. Node 2 ships five frames, so node 1 stays in Phase I
    // until vtime 5 while node 0's decision reaches it at vtime 2.
    let m = SpinModel::coloring(Graph::path(3), 4).unwrap();
    let node = |times: Vec<f64>, proposals: Vec<u32>| NodeUpdates {
        coins: vec![0.0; times.len()],
        times,
        proposals,
    };
    let s = UpdateSchedule::from_parts(
        1.0,
        0,
        vec![
            node(vec![0.1], vec![1]),
            node(vec![0.5], vec![1]),
            node(vec![0.6, 0.7, 0.8, 0.9, 0.95], vec![0, 1, 2, 3, 0]),
        ],
    )
    .unwrap();
    let y0 = Configuration::new(vec![0, 3, 2]);
    let out = netsim::run(&m, &s, &y0, &Scheduler::Synchronous, true).unwrap();
    assert_eq!(out.final_config, run_continuous(&m, &s, &y0).unwrap().final_config);
    assert_eq!(out.stats.phase2_entry, vec![1.0, 5.0, 1.0]);
    let trace = out.trace.unwrap();
    let delivered_early = trace.events.iter().any(|e| {
        e.vtime == 2.0 && matches!(e.kind, TraceKind::Deliver { src: 0, dst: 1, .. })
    });
    assert!(delivered_early);
    let resolve = trace
        .events
        .iter()
        .find_map(|e| match e.kind {
            TraceKind::Resolve { update, trigger, accepted } if update == UpdateId::new(1, 1) => {
                Some((e.vtime, trigger, accepted))
            }
            _ => None,
        })
        .unwrap();
    // node 0 moved to 1, which is node 1's proposal
    assert_eq!(resolve, (5.0, Trigger::TriggeredBy(UpdateId::new(0, 1)), false));
    assert_eq!(out.stats.termination, vec![1.0, 5.0, 6.0]);
}

#[test]
fn adversarial_two_node_alternation() {
    // interleaved updates on a single edge, q = 2, each proposing the color the
    // other node might hold: every update waits for the other node's
    // preceding one, and all are rejected
    let m = SpinModel::coloring(Graph::path(2), 2).unwrap();
    let s = two_node(
        vec![0.1, 0.3, 0.5],
        vec![1, 1, 1],
        vec![0.0; 3],
        vec![0.2, 0.4, 0.6],
        vec![0, 0, 0],
        vec![0.0; 3],
    );
    let y0 = Configuration::new(vec![0, 1]);
    let out = netsim::run(&m, &s, &y0, &Scheduler::AdversarialMax, true).unwrap();
    assert_eq!(out.final_config, run_continuous(&m, &s, &y0).unwrap().final_config);
    let trace = out.trace.unwrap();
    let resolves: Vec<(f64, UpdateId, Trigger)> = trace
        .events
        .iter()
        .filter_map(|e| match e.kind {
            TraceKind::Resolve { update, trigger, .. } => Some((e.vtime, update, trigger)),
            _ => None,
        })
        .collect();
    let expected = [
        (3.0, UpdateId::new(0, 1), Trigger::SelfTriggered),
        (4.0, UpdateId::new(1, 1), Trigger::TriggeredBy(UpdateId::new(0, 1))),
        (5.0, UpdateId::new(0, 2), Trigger::TriggeredBy(UpdateId::new(1, 1))),
        (6.0, UpdateId::new(1, 2), Trigger::TriggeredBy(UpdateId::new(0, 2))),
        (7.0, UpdateId::new(0, 3), Trigger::TriggeredBy(UpdateId::new(1, 2))),
        (8.0, UpdateId::new(1, 3), Trigger::TriggeredBy(UpdateId::new(0, 3))),
    ];
    assert_eq!(resolves, expected);
    assert_eq!(out.stats.phase1_end, 3.0);
    assert_eq!(out.stats.residence, vec![4.0, 5.0]);
}

#[test]
fn trace_text_replay_reproduces_stats() {
    let m = SpinModel::hardcore(Graph::grid(4, 4), 1.0).unwrap();
    let s = UpdateSchedule::generate(&m, 6.0, 12).unwrap();
    let out = netsim::run(&m, &s, &Configuration::constant(16, 0), &Scheduler::UniformRandom { seed: 3 }, true).unwrap();
    let text = out.trace.as_ref().unwrap().to_text();
    let parsed = Trace::parse_text(&text).unwrap();
    assert_eq!(&parsed, out.trace.as_ref().unwrap());
    assert_eq!(RunStats::from_trace(&parsed).unwrap(), out.stats);
}

#[test]
fn deterministic_under_fixed_seeds() {
    let m = SpinModel::ising(Graph::random_regular(20, 3, 9).unwrap(), 0.3).unwrap();
    let s = UpdateSchedule::generate(&m, 5.0, 2).unwrap();
    let y0 = Configuration::constant(20, 0);
    let a = netsim::run(&m, &s, &y0, &Scheduler::UniformRandom { seed: 8 }, true).unwrap();
    let b = netsim::run(&m, &s, &y0, &Scheduler::UniformRandom { seed: 8 }, true).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn triggers_respect_update_order() {
    let g = Graph::random_regular(40, 4, 5).unwrap();
    let y0 = Configuration::new(g.greedy_coloring(9).unwrap());
    let m = SpinModel::coloring(g, 9).unwrap();
    for seed in 0..5 {
        let s = UpdateSchedule::generate(&m, 5.0, seed).unwrap();
        let out = netsim::run(&m, &s, &y0, &Scheduler::UniformRandom { seed }, true).unwrap();
        for e in &out.trace.unwrap().events {
            if let TraceKind::Resolve {
                update,
                trigger: Trigger::TriggeredBy(by),
                ..
            } = e.kind
            {
                assert!(s.precedes(by, update), "{by:?} does not precede {update:?}");
                assert!(m.graph().neighbors(update.node).contains(&by.node));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coupling_on_random_small_graphs(
        n in 2usize..10,
        edges in proptest::collection::vec((0usize..10, 0usize..10), 0..20),
        q in 2usize..5,
        seed in any::<u64>(),
        delay_seed in any::<u64>(),
        start in proptest::collection::vec(0u32..5, 10),
    ) {
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
        let g = Graph::from_edges(n, edges).unwrap();
        let y0 = Configuration::new(start[..n].iter().map(|&s| s % q as u32).collect());
        let m = SpinModel::coloring(g, q).unwrap();
        let s = UpdateSchedule::generate(&m, 3.0, seed).unwrap();
        let expected = run_continuous(&m, &s, &y0).unwrap().final_config;
        for sched in [Scheduler::Synchronous, Scheduler::UniformRandom { seed: delay_seed }] {
            let out = netsim::run(&m, &s, &y0, &sched, false).unwrap();
            prop_assert_eq!(&out.final_config, &expected);
        }
    }
}
