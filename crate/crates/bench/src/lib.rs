//! Fixtures shared by the benchmarks.

use asyncmh_core::{Configuration, Graph, SpinModel, UpdateSchedule};

/// q-coloring of a random 4-regular graph with a greedy start and a schedule.
pub fn coloring_fixture(n: usize, q: usize, horizon: f64, seed: u64) -> (SpinModel, Configuration, UpdateSchedule) {
    let graph = Graph::random_regular(n, 4, seed).expect("random regular graph");
    let start = Configuration::new(graph.greedy_coloring(q).expect("q exceeds the degree"));
    let model = SpinModel::coloring(graph, q).expect("coloring model");
    let schedule = UpdateSchedule::generate(&model, horizon, seed).expect("schedule");
    (model, start, schedule)
}

/// Ising model on a square grid, all spins down.
pub fn ising_fixture(side: usize, beta: f64, horizon: f64, seed: u64) -> (SpinModel, Configuration, UpdateSchedule) {
    let model = SpinModel::ising(Graph::grid(side, side), beta).expect("ising model");
    let start = Configuration::constant(side * side, 0);
    let schedule = UpdateSchedule::generate(&model, horizon, seed).expect("schedule");
    (model, start, schedule)
}
