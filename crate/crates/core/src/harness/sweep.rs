use std::io;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::Config;
use super::runner::{Experiment, RunRecord};
use crate::error::{Error, Result};
use crate::instrument::RunRow;

/// Per-(n, T) aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub n: usize,
    pub horizon: f64,
    pub runs: usize,
    pub median_makespan: f64,
    pub max_makespan: f64,
    pub median_max_residence: f64,
    pub max_max_residence: f64,
    pub median_max_chain_len: f64,
    pub max_max_chain_len: usize,
    /// Runs with some node whose rounded-up residence exceeds its chain length.
    pub bound_violations: usize,
    pub fitted: f64,
    pub residual: f64,
}

/// Least-squares fit of the median max residence on `[1, T, ln n]`. The `T`
/// column is used only when several horizons were swept, the `ln n` column
/// only when several sizes were.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidenceFit {
    pub intercept: f64,
    pub horizon_coef: Option<f64>,
    pub log_n_coef: Option<f64>,
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<SweepSummary>,
    pub fit: ResidenceFit,
}

impl SweepReport {
    /// Ratios of median max residence between consecutive sizes at the same
    /// horizon: `(n_small, n_large, ratio)`.
    pub fn growth(&self) -> Vec<(usize, usize, f64)> {
        self.summaries
            .windows(2)
            .filter(|w| w[0].horizon == w[1].horizon)
            .map(|w| (w[0].n, w[1].n, w[1].median_max_residence / w[0].median_max_residence))
            .collect()
    }

    /// Fraction of runs at size `n` whose max residence is at least `level`.
    pub fn exceedance(&self, n: usize, level: f64) -> f64 {
        let at_n: Vec<&RunRow> = self.rows.iter().filter(|r| r.n == n).collect();
        if at_n.is_empty() {
            return 0.0;
        }
        at_n.iter().filter(|r| r.max_residence >= level).count() as f64 / at_n.len() as f64
    }

    pub fn write_summary<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.summaries {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `ceil(2e(1 + 2C)T + 2 log2 n)`: chain length beyond which long dependency
/// chains become unlikely under the Lipschitz condition with constant `C`.
pub fn chain_tail_threshold(lipschitz: f64, horizon: f64, n: usize) -> f64 {
    (2.0 * std::f64::consts::E * (1.0 + 2.0 * lipschitz) * horizon + 2.0 * (n.max(1) as f64).log2()).ceil()
}

/// Runs every (size, horizon, seed) cell with the first configured scheduler.
pub fn sweep(config: &Config, pool: &rayon::ThreadPool) -> Result<SweepReport> {
    let sizes = if config.experiment.sizes.is_empty() {
        vec![config.build_graph(None)?.node_count()]
    } else {
        config.experiment.sizes.clone()
    };
    let mut experiments = Vec::new();
    for &n in &sizes {
        for horizon in config.sweep_horizons() {
            experiments.push(Experiment::with_size(config.clone(), Some(n), Some(horizon))?);
        }
    }
    let seeds: Vec<u64> = config.seeds().collect();
    let cells: Vec<(usize, u64)> = (0..experiments.len())
        .flat_map(|e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    let records: Vec<(usize, RunRecord)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(e, seed)| {
                let exp = &experiments[e];
                let scheduler = config.schedulers(seed)?.swap_remove(0);
                let mut record = exp.simulate(seed, &scheduler)?;
                record.trace.events = Vec::new();
                Ok((e, record))
            })
            .collect::<Result<_>>()
    })?;

    let mut summaries: Vec<SweepSummary> = experiments
        .iter()
        .enumerate()
        .map(|(e, exp)| {
            let group: Vec<&RunRecord> = records.iter().filter(|(k, _)| *k == e).map(|(_, r)| r).collect();
            let col = |f: &dyn Fn(&RunRow) -> f64| -> Vec<f64> { group.iter().map(|r| f(&r.row)).collect() };
            let makespan = col(&|r| r.makespan);
            let residence = col(&|r| r.max_residence);
            let chain = col(&|r| r.max_chain_len as f64);
            SweepSummary {
                n: exp.model.node_count(),
                horizon: exp.horizon,
                runs: group.len(),
                median_makespan: median(&makespan),
                max_makespan: max(&makespan),
                median_max_residence: median(&residence),
                max_max_residence: max(&residence),
                median_max_chain_len: median(&chain),
                max_max_chain_len: max(&chain) as usize,
                bound_violations: group.iter().filter(|r| r.bound_violations > 0).count(),
                fitted: f64::NAN,
                residual: f64::NAN,
            }
        })
        .collect();
    summaries.sort_by(|a, b| a.horizon.total_cmp(&b.horizon).then(a.n.cmp(&b.n)));
    let fit = fit_residence(&mut summaries)?;
    let mut rows: Vec<RunRow> = records.into_iter().map(|(_, r)| r.row).collect();
    rows.sort_by(|a, b| a.horizon.total_cmp(&b.horizon).then(a.n.cmp(&b.n)).then(a.seed.cmp(&b.seed)));
    Ok(SweepReport { rows, summaries, fit })
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NAN, f64::max)
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fills `fitted` and `residual` of every summary.
fn fit_residence(summaries: &mut [SweepSummary]) -> Result<ResidenceFit> {
    let use_t = distinct(summaries.iter().map(|s| s.horizon)) > 1;
    let use_n = distinct(summaries.iter().map(|s| s.n as f64)) > 1;
    let columns = 1 + usize::from(use_t) + usize::from(use_n);
    let rows = summaries.len();
    let design = DMatrix::from_fn(rows, columns, |i, j| {
        let s = &summaries[i];
        match (j, use_t) {
            (0, _) => 1.0,
            (1, true) => s.horizon,
            _ => (s.n as f64).ln(),
        }
    });
    let y = DVector::from_iterator(rows, summaries.iter().map(|s| s.median_max_residence));
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("least squares: {e}")))?;
    let fitted = &design * &coef;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    for (s, &f) in summaries.iter_mut().zip(fitted.iter()) {
        s.fitted = f;
        s.residual = s.median_max_residence - f;
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-18 {
        1.0
    } else {
        0.0
    };
    Ok(ResidenceFit {
        intercept: coef[0],
        horizon_coef: use_t.then(|| coef[1]),
        log_n_coef: use_n.then(|| coef[columns - 1]),
        r_squared,
    })
}
