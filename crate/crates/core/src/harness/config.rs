use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Configuration, Graph, ModelKind, PairwiseFilter, SpinModel};
use crate::netsim::{FixedDelays, Scheduler};
use crate::oracle::bridge::extended_horizon;

/// Experiment description, read from TOML.
///
/// ```toml
/// [model]
/// kind = "coloring"        # coloring | hardcore | ising | custom
/// q = 8
///
/// [graph]
/// kind = "random-regular"  # random-regular | grid | cycle | path | complete | star | empty | file
/// n = 50
/// degree = 4
/// seed = 1
///
/// [chain]
/// horizon = 10.0
/// initial = "greedy"       # greedy | zero | fixed
///
/// [scheduler]
/// kinds = ["synchronous", "uniform", "adversarial"]
///
/// [experiment]
/// seed_start = 1
/// seed_count = 100
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub graph: GraphSection,
    pub chain: ChainSection,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    /// Directory relative graph files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub q: Option<usize>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    /// Pairwise weights `W[a][b] > 0` of a custom model.
    pub weights: Option<Vec<Vec<f64>>>,
    /// Proposal distribution shared by all nodes of a custom model; uniform if absent.
    pub proposal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub kind: String,
    pub n: Option<usize>,
    pub degree: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub horizon: f64,
    /// Replace `T` by `2T + 8 ln n`.
    #[serde(default)]
    pub extend_horizon: bool,
    pub initial: Option<String>,
    pub values: Option<Vec<u32>>,
    #[serde(default)]
    pub require_proper: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    #[serde(default = "default_scheduler_kinds")]
    pub kinds: Vec<String>,
    /// Mixed with the run seed to seed uniform delays.
    #[serde(default)]
    pub seed: u64,
    /// Default delay of the `fixed` policy.
    pub fixed_delay: Option<f64>,
    /// `[src, dst, delay]` overrides for the `fixed` policy.
    #[serde(default)]
    pub fixed_channels: Vec<(usize, usize, f64)>,
}

fn default_scheduler_kinds() -> Vec<String> {
    vec!["adversarial".into()]
}

impl Default for SchedulerSection {
    fn default() -> Self {
        SchedulerSection {
            kinds: default_scheduler_kinds(),
            seed: 0,
            fixed_delay: None,
            fixed_channels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "one")]
    pub seed_start: u64,
    #[serde(default = "one")]
    pub seed_count: u64,
    /// Independent runs of `tv-test`.
    pub runs: Option<u64>,
    /// Graph sizes of `sweep`.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Horizons of `sweep`; defaults to the chain horizon.
    #[serde(default)]
    pub horizons: Vec<f64>,
}

fn one() -> u64 {
    1
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed_start: 1,
            seed_count: 1,
            runs: None,
            sizes: Vec::new(),
            horizons: Vec::new(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let start = self.experiment.seed_start;
        (0..self.experiment.seed_count).map(move |k| start.wrapping_add(k))
    }

    /// Graph with `n` overriding the configured size.
    pub fn build_graph(&self, n: Option<usize>) -> Result<Graph> {
        let g = &self.graph;
        let size = || {
            n.or(g.n)
                .ok_or_else(|| Error::Config(format!("graph kind `{}` needs `n`", g.kind)))
        };
        match g.kind.as_str() {
            "random-regular" => {
                let degree = g.degree.ok_or_else(|| Error::Config("random-regular graph needs `degree`".into()))?;
                Graph::random_regular(size()?, degree, g.seed)
            }
            "grid" => match n {
                Some(n) => {
                    let side = (n as f64).sqrt().round() as usize;
                    if side * side != n {
                        return Err(Error::Config(format!("grid size {n} is not a square")));
                    }
                    Ok(Graph::grid(side, side))
                }
                None => {
                    let w = g.width.ok_or_else(|| Error::Config("grid needs `width`".into()))?;
                    Ok(Graph::grid(w, g.height.unwrap_or(w)))
                }
            },
            "cycle" => Graph::cycle(size()?),
            "path" => Ok(Graph::path(size()?)),
            "complete" => Ok(Graph::complete(size()?)),
            "star" => Ok(Graph::star(size()?.saturating_sub(1))),
            "empty" => Ok(Graph::empty(size()?)),
            "file" => {
                let path = g.path.as_ref().ok_or_else(|| Error::Config("file graph needs `path`".into()))?;
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read graph file {}: {e}", path.display())))?;
                Graph::parse_edge_list(&text, g.n)
            }
            other => Err(Error::Config(format!("unknown graph kind `{other}`"))),
        }
    }

    pub fn build_model(&self, graph: Graph) -> Result<SpinModel> {
        let m = &self.model;
        let need = |name: &str| Error::Config(format!("model `{}` needs `{name}`", m.kind));
        match m.kind.as_str() {
            "coloring" => SpinModel::coloring(graph, m.q.ok_or_else(|| need("q"))?),
            "hardcore" => SpinModel::hardcore(graph, m.lambda.ok_or_else(|| need("lambda"))?),
            "ising" => SpinModel::ising(graph, m.beta.ok_or_else(|| need("beta"))?),
            "custom" => {
                let weights = m.weights.clone().ok_or_else(|| need("weights"))?;
                let filter = PairwiseFilter::new(weights)?;
                let q = filter.q();
                let proposal = m.proposal.clone().unwrap_or_else(|| vec![1.0 / q as f64; q]);
                let n = graph.node_count();
                SpinModel::custom(graph, q, vec![proposal; n], Arc::new(filter))
            }
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }

    /// `T`, or `2T + 8 ln n` when `extend_horizon` is set.
    pub fn horizon_for(&self, horizon: f64, n: usize) -> f64 {
        if self.chain.extend_horizon {
            extended_horizon(horizon, n)
        } else {
            horizon
        }
    }

    pub fn initial_configuration(&self, model: &SpinModel) -> Result<Configuration> {
        let n = model.node_count();
        let default = match model.kind() {
            ModelKind::Coloring => "greedy",
            _ => "zero",
        };
        let policy = self.chain.initial.as_deref().unwrap_or(default);
        let config = match policy {
            "greedy" => {
                if !matches!(model.kind(), ModelKind::Coloring) {
                    return Err(Error::Config("greedy initial configuration applies to coloring only".into()));
                }
                let colors = model.graph().greedy_coloring(model.q()).ok_or_else(|| {
                    Error::Config(format!(
                        "greedy coloring needs q >= max degree + 1 (q = {}, max degree = {}); set `initial`",
                        model.q(),
                        model.graph().max_degree()
                    ))
                })?;
                Configuration::new(colors)
            }
            "zero" => Configuration::constant(n, 0),
            "fixed" => {
                let values = self
                    .chain
                    .values
                    .clone()
                    .ok_or_else(|| Error::Config("fixed initial configuration needs `values`".into()))?;
                Configuration::new(values)
            }
            other => return Err(Error::Config(format!("unknown initial policy `{other}`"))),
        };
        model
            .validate_configuration(&config)
            .map_err(|e| Error::Config(format!("initial configuration: {e}")))?;
        if self.chain.require_proper && matches!(model.kind(), ModelKind::Coloring) && !model.is_proper_coloring(&config) {
            return Err(Error::Config("initial configuration is not a proper coloring".into()));
        }
        Ok(config)
    }

    /// The configured policies for one run seed. Uniform delays are seeded
    /// from the scheduler seed mixed with the run seed.
    pub fn schedulers(&self, run_seed: u64) -> Result<Vec<Scheduler>> {
        let s = &self.scheduler;
        if s.kinds.is_empty() {
            return Err(Error::Config("no scheduler configured".into()));
        }
        s.kinds
            .iter()
            .map(|kind| match kind.as_str() {
                "fixed" => {
                    let mut table = FixedDelays::new(s.fixed_delay.unwrap_or(1.0))?;
                    for &(src, dst, delay) in &s.fixed_channels {
                        table = table.with_channel(src, dst, delay)?;
                    }
                    Ok(Scheduler::Fixed(table))
                }
                other => match other.parse::<Scheduler>() {
                    Ok(Scheduler::UniformRandom { .. }) => Ok(Scheduler::UniformRandom {
                        seed: mix_seed(s.seed, run_seed),
                    }),
                    Ok(policy) => Ok(policy),
                    Err(e) => Err(Error::Config(e.to_string())),
                },
            })
            .collect()
    }

    /// Sweep horizons, defaulting to the chain horizon.
    pub fn sweep_horizons(&self) -> Vec<f64> {
        if self.experiment.horizons.is_empty() {
            vec![self.chain.horizon]
        } else {
            self.experiment.horizons.clone()
        }
    }
}

pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined seeds
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[model]
kind = "coloring"
q = 8

[graph]
kind = "random-regular"
n = 20
degree = 4
seed = 3

[chain]
horizon = 5.0

[scheduler]
kinds = ["synchronous", "uniform", "adversarial"]

[experiment]
seed_start = 7
seed_count = 3
"#;

    #[test]
    fn parses_and_builds() {
        let c = Config::from_toml(BASIC).unwrap();
        let g = c.build_graph(None).unwrap();
        assert_eq!(g.node_count(), 20);
        let m = c.build_model(g).unwrap();
        let y0 = c.initial_configuration(&m).unwrap();
        assert!(m.is_proper_coloring(&y0));
        assert_eq!(c.seeds().collect::<Vec<_>>(), vec![7, 8, 9]);
        let s = c.schedulers(7).unwrap();
        assert_eq!(s.len(), 3);
        assert_ne!(c.schedulers(8).unwrap()[1], s[1]);
    }

    #[test]
    fn greedy_needs_enough_colors() {
        let text = BASIC.replace("q = 8", "q = 3");
        let c = Config::from_toml(&text).unwrap();
        let m = c.build_model(c.build_graph(None).unwrap()).unwrap();
        assert!(matches!(c.initial_configuration(&m), Err(Error::Config(_))));
    }

    #[test]
    fn improper_fixed_start_rejected_when_required() {
        let text = BASIC
            .replace("kind = \"random-regular\"\nn = 20\ndegree = 4", "kind = \"path\"\nn = 3")
            .replace("horizon = 5.0", "horizon = 5.0\ninitial = \"fixed\"\nvalues = [1, 1, 2]\nrequire_proper = true");
        let c = Config::from_toml(&text).unwrap();
        let m = c.build_model(c.build_graph(None).unwrap()).unwrap();
        assert!(c.initial_configuration(&m).is_err());
    }

    #[test]
    fn unknown_keys_and_kinds() {
        assert!(Config::from_toml(&BASIC.replace("q = 8", "q = 8\ncolour = 1")).is_err());
        let c = Config::from_toml(&BASIC.replace("\"coloring\"", "\"potts\"")).unwrap();
        assert!(c.build_model(Graph::path(2)).is_err());
    }

    #[test]
    fn extended_horizon() {
        let c = Config::from_toml(&BASIC.replace("horizon = 5.0", "horizon = 5.0\nextend_horizon = true")).unwrap();
        assert!((c.horizon_for(5.0, 100) - (10.0 + 8.0 * 100f64.ln())).abs() < 1e-12);
    }
}
