use rayon::prelude::*;

use super::config::Config;
use crate::error::{Error, Result};
use crate::instrument::{analyze, RunRow};
use crate::model::{Configuration, ModelKind, SpinModel, State};
use crate::netsim::{self, Scheduler, Trace};
use crate::oracle::{exact_distribution, exact_stationary, run_continuous, ConfigHistogram, ExactDistribution};
use crate::schedule::UpdateSchedule;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "ASYNCMH_WORKERS";

/// A rayon pool with `workers` threads, or rayon's default when `None`.
pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// A configured model with its initial configuration and horizon.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: Config,
    pub model: SpinModel,
    pub initial: Configuration,
    pub horizon: f64,
}

impl Experiment {
    pub fn from_config(config: Config) -> Result<Self> {
        Self::with_size(config, None, None)
    }

    /// Overrides the graph size and the horizon.
    pub fn with_size(config: Config, n: Option<usize>, horizon: Option<f64>) -> Result<Self> {
        let model = config.build_model(config.build_graph(n)?)?;
        let initial = config.initial_configuration(&model)?;
        let horizon = config.horizon_for(horizon.unwrap_or(config.chain.horizon), model.node_count());
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be finite and non-negative, got {horizon}")));
        }
        Ok(Experiment {
            config,
            model,
            initial,
            horizon,
        })
    }

    pub fn schedule(&self, seed: u64) -> Result<UpdateSchedule> {
        UpdateSchedule::generate(&self.model, self.horizon, seed)
    }

    pub fn model_param(&self) -> f64 {
        match *self.model.kind() {
            ModelKind::Hardcore { lambda } => lambda,
            ModelKind::Ising { beta } => beta,
            ModelKind::Coloring | ModelKind::Custom(_) => self.model.q() as f64,
        }
    }

    /// One simulated run, with its CSV row.
    pub fn simulate(&self, seed: u64, scheduler: &Scheduler) -> Result<RunRecord> {
        let schedule = self.schedule(seed)?;
        let out = netsim::run(&self.model, &schedule, &self.initial, scheduler, true)?;
        let trace = out.trace.expect("trace requested");
        let report = analyze(&trace, &out.stats, &schedule)?;
        let row = RunRow {
            seed,
            scheduler: scheduler.name().to_string(),
            n: self.model.node_count(),
            max_degree: self.model.graph().max_degree(),
            param: self.model_param(),
            horizon: self.horizon,
            makespan: out.stats.makespan,
            phase1_end: out.stats.phase1_end,
            max_residence: out.stats.max_residence(),
            max_chain_len: report.max_chain_len(),
            messages: out.stats.message_count,
            bits: out.stats.total_bits,
        };
        Ok(RunRecord {
            row,
            final_config: out.final_config,
            bound_violations: report.violations().len(),
            trace,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub row: RunRow,
    pub final_config: Configuration,
    /// Nodes whose rounded-up Phase-II residence exceeds their chain length.
    pub bound_violations: usize,
    pub trace: Trace,
}

/// Every configured (seed, scheduler) pair, sorted by seed then scheduler
/// position in the config.
pub fn run_all(exp: &Experiment, pool: &rayon::ThreadPool) -> Result<Vec<RunRecord>> {
    let cells = cells(exp)?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|(seed, scheduler)| exp.simulate(*seed, scheduler))
            .collect()
    })
}

fn cells(exp: &Experiment) -> Result<Vec<(u64, Scheduler)>> {
    let mut cells = Vec::new();
    for seed in exp.config.seeds() {
        for scheduler in exp.config.schedulers(seed)? {
            cells.push((seed, scheduler));
        }
    }
    Ok(cells)
}

/// First coordinate where the simulator and the sequential chain disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub seed: u64,
    pub scheduler: String,
    pub node: usize,
    pub expected: State,
    pub got: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub checked: usize,
    pub mismatch: Option<Mismatch>,
}

/// Hook that alters the schedule handed to the simulator (not the oracle).
pub type Tamper<'a> = &'a (dyn Fn(u64, &mut UpdateSchedule) + Sync);

/// Runs every configured (seed, scheduler) pair through the simulator and the
/// sequential chain on the same schedule and compares the final states.
pub fn verify_coupling(exp: &Experiment, pool: &rayon::ThreadPool, tamper: Option<Tamper<'_>>) -> Result<CouplingReport> {
    let cells = cells(exp)?;
    let results: Vec<Option<Mismatch>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(seed, scheduler)| -> Result<Option<Mismatch>> {
                let schedule = exp.schedule(*seed)?;
                let expected = run_continuous(&exp.model, &schedule, &exp.initial)?.final_config;
                let mut sim_schedule = schedule;
                if let Some(t) = tamper {
                    t(*seed, &mut sim_schedule);
                }
                let got = netsim::run(&exp.model, &sim_schedule, &exp.initial, scheduler, false)?.final_config;
                Ok((0..expected.len()).find(|&v| expected[v] != got[v]).map(|node| Mismatch {
                    seed: *seed,
                    scheduler: scheduler.name().to_string(),
                    node,
                    expected: expected[node],
                    got: got[node],
                }))
            })
            .collect::<Result<_>>()
    })?;
    Ok(CouplingReport {
        checked: cells.len(),
        mismatch: results.into_iter().flatten().next(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvReport {
    pub runs: u64,
    pub tv: f64,
    /// Configurations with positive target mass.
    pub support: usize,
    /// Distinct configurations observed.
    pub observed: usize,
}

/// Target distribution of a configured model.
pub fn target_distribution(exp: &Experiment) -> Result<ExactDistribution> {
    match exp.model.kind() {
        ModelKind::Custom(_) => {
            let m = &exp.config.model;
            let weights = m.weights.as_ref().ok_or_else(|| Error::Config("custom model needs weights".into()))?;
            let q = weights.len();
            let symmetric = (0..q).all(|a| (0..q).all(|b| weights[a][b] == weights[b][a]));
            let uniform = m
                .proposal
                .as_ref()
                .is_none_or(|p| p.iter().all(|&x| (x - 1.0 / q as f64).abs() < 1e-12));
            if !symmetric || !uniform {
                return Err(Error::Unsupported(
                    "stationary law of a custom model is known only for symmetric weights and uniform proposals".into(),
                ));
            }
            let edges: Vec<(usize, usize)> = exp.model.graph().edges().collect();
            exact_distribution(&exp.model, |x| {
                edges
                    .iter()
                    .map(|&(u, v)| weights[x[u] as usize][x[v] as usize])
                    .product()
            })
        }
        _ => exact_stationary(&exp.model),
    }
}

/// Total-variation distance between the law of `runs` independent simulated
/// outputs and the exact target. Run `k` uses seed `seed_start + k` and the
/// first configured scheduler.
pub fn tv_test(exp: &Experiment, pool: &rayon::ThreadPool, runs: u64) -> Result<TvReport> {
    let target = target_distribution(exp)?;
    let mut histogram = ConfigHistogram::new(exp.model.node_count(), exp.model.q())?;
    let start = exp.config.experiment.seed_start;
    let finals: Vec<Configuration> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|k| {
                let seed = start.wrapping_add(k);
                let scheduler = exp.config.schedulers(seed)?.swap_remove(0);
                let schedule = exp.schedule(seed)?;
                Ok(netsim::run(&exp.model, &schedule, &exp.initial, &scheduler, false)?.final_config)
            })
            .collect::<Result<_>>()
    })?;
    for config in &finals {
        histogram.record(config.values());
    }
    Ok(TvReport {
        runs,
        tv: target.tv_distance(&histogram),
        support: target.support_size(),
        observed: histogram.counts().iter().filter(|&&c| c > 0).count(),
    })
}
