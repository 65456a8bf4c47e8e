use crate::error::{Error, Result};
use crate::model::{spin, Configuration, ModelKind, SpinModel, State};

/// Largest state space `q^n` that is enumerated exhaustively.
pub const EXACT_STATE_LIMIT: u64 = 1_000_000;

/// Probability table over `[q]^V`. Configuration `x` sits at index
/// `sum_v x_v q^v`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, config: &[State]) -> usize {
        config.iter().rev().fold(0usize, |acc, &s| acc * self.q + s as usize)
    }

    pub fn configuration(&self, mut index: usize) -> Configuration {
        let values = (0..self.n)
            .map(|_| {
                let s = (index % self.q) as State;
                index /= self.q;
                s
            })
            .collect();
        Configuration::new(values)
    }

    pub fn prob(&self, config: &[State]) -> f64 {
        self.probs[self.index_of(config)]
    }

    /// Configurations with positive mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Total-variation distance to an empirical histogram.
    pub fn tv_distance(&self, histogram: &ConfigHistogram) -> f64 {
        assert_eq!(histogram.counts.len(), self.probs.len(), "histogram shape mismatch");
        let total = histogram.total.max(1) as f64;
        0.5 * self
            .probs
            .iter()
            .zip(&histogram.counts)
            .map(|(&p, &c)| (p - c as f64 / total).abs())
            .sum::<f64>()
    }
}

/// Dense counts over `[q]^V`, indexed like [`ExactDistribution`].
#[derive(Debug, Clone)]
pub struct ConfigHistogram {
    q: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ConfigHistogram {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        let size = state_space_size(n, q)?;
        Ok(ConfigHistogram {
            q,
            counts: vec![0; size],
            total: 0,
        })
    }

    pub fn record(&mut self, config: &[State]) {
        let index = config.iter().rev().fold(0usize, |acc, &s| acc * self.q + s as usize);
        self.counts[index] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

fn state_space_size(n: usize, q: usize) -> Result<usize> {
    match (q as u64).checked_pow(n as u32) {
        Some(size) if size <= EXACT_STATE_LIMIT => Ok(size as usize),
        _ => Err(Error::Unsupported(format!(
            "state space q^n = {q}^{n} exceeds {EXACT_STATE_LIMIT}"
        ))),
    }
}

/// Normalized `weight` over every configuration of the model.
pub fn exact_distribution<W>(model: &SpinModel, weight: W) -> Result<ExactDistribution>
where
    W: Fn(&[State]) -> f64,
{
    let n = model.node_count();
    let q = model.q();
    let size = state_space_size(n, q)?;
    let mut probs = Vec::with_capacity(size);
    let mut config: Vec<State> = vec![0; n];
    for index in 0..size {
        if index > 0 {
            // odometer increment, node 0 least significant
            for s in config.iter_mut() {
                *s += 1;
                if (*s as usize) < q {
                    break;
                }
                *s = 0;
            }
        }
        probs.push(weight(&config));
    }
    let z: f64 = probs.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidArgument(format!("partition function is {z}")));
    }
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(ExactDistribution { n, q, probs })
}

/// Stationary distribution of a built-in model: uniform over proper colorings,
/// `lambda^{#occupied}` over independent sets, or `exp(beta sum_{uv} s_u s_v)`.
pub fn exact_stationary(model: &SpinModel) -> Result<ExactDistribution> {
    let graph = model.graph();
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    match *model.kind() {
        ModelKind::Coloring => exact_distribution(model, |x| {
            if edges.iter().all(|&(u, v)| x[u] != x[v]) {
                1.0
            } else {
                0.0
            }
        }),
        ModelKind::Hardcore { lambda } => exact_distribution(model, |x| {
            if edges.iter().any(|&(u, v)| x[u] == 1 && x[v] == 1) {
                0.0
            } else {
                lambda.powi(x.iter().filter(|&&s| s == 1).count() as i32)
            }
        }),
        ModelKind::Ising { beta } => exact_distribution(model, |x| {
            let energy: i32 = edges.iter().map(|&(u, v)| spin(x[u]) * spin(x[v])).sum();
            (beta * f64::from(energy)).exp()
        }),
        ModelKind::Custom(_) => Err(Error::Unsupported(
            "custom models need an explicit weight function".into(),
        )),
    }
}
