use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{Configuration, SpinModel, State};

/// The discrete-time single-site Metropolis chain: pick a node uniformly,
/// draw a proposal from its `nu_v`, accept with the filter probability.
#[derive(Debug, Clone)]
pub struct DiscreteChain<'m> {
    model: &'m SpinModel,
    rng: ChaCha8Rng,
    state: Configuration,
    samplers: Vec<WeightedIndex<f64>>,
    tau: Vec<State>,
    steps: u64,
}

impl<'m> DiscreteChain<'m> {
    pub fn new(model: &'m SpinModel, seed: u64, initial: Configuration) -> Result<Self> {
        model.validate_configuration(&initial)?;
        if model.node_count() == 0 {
            return Err(invalid("discrete chain needs at least one node"));
        }
        let samplers = (0..model.node_count())
            .map(|v| WeightedIndex::new(model.proposal(v)).map_err(|e| invalid(format!("proposal at node {v}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(DiscreteChain {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: initial,
            samplers,
            tau: Vec::with_capacity(model.graph().max_degree()),
            steps: 0,
        })
    }

    pub fn step(&mut self) {
        let graph = self.model.graph();
        let v = self.rng.random_range(0..graph.node_count());
        let proposal = self.samplers[v].sample(&mut self.rng) as State;
        self.tau.clear();
        self.tau.extend(graph.neighbors(v).iter().map(|&u| self.state[u]));
        let current = self.state[v];
        if self.rng.random::<f64>() < self.model.filter(v, current, proposal, &self.tau) {
            self.state.values_mut()[v] = proposal;
        }
        self.steps += 1;
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn into_state(self) -> Configuration {
        self.state
    }
}

/// `X_N` after `steps` transitions from `initial`.
pub fn run_discrete(model: &SpinModel, steps: u64, seed: u64, initial: Configuration) -> Result<Configuration> {
    if steps == 0 {
        model.validate_configuration(&initial)?;
        return Ok(initial);
    }
    let mut chain = DiscreteChain::new(model, seed, initial)?;
    chain.run(steps);
    Ok(chain.into_state())
}
