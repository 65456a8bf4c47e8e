//! The continuous-time chain at time `T` is the discrete chain after a
//! `Pois(nT)` number of steps; these helpers expose the Poisson tail bounds
//! used to relate the two.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonBridge {
    pub horizon: f64,
    pub nodes: usize,
    /// Mean number of discrete steps, `n T`.
    pub mean: f64,
}

pub fn discrete_continuous_bridge(horizon: f64, nodes: usize) -> Result<PoissonBridge> {
    if !(horizon > 0.0) || !horizon.is_finite() || nodes == 0 {
        return Err(invalid(format!("need T > 0 and n > 0, got T = {horizon}, n = {nodes}")));
    }
    Ok(PoissonBridge {
        horizon,
        nodes,
        mean: horizon * nodes as f64,
    })
}

impl PoissonBridge {
    /// `Pr[N <= (1 - eps) mu] <= exp(-eps^2 mu / 2)`.
    pub fn lower_tail(&self, eps: f64) -> f64 {
        lower_tail_bound(self.mean, eps)
    }

    /// `Pr[N >= (1 + eps) mu] <= exp(-eps^2 mu / 3)`.
    pub fn upper_tail(&self, eps: f64) -> f64 {
        upper_tail_bound(self.mean, eps)
    }

    /// Horizon `2T + 8 ln n` that yields at least `nT` steps with high probability.
    pub fn extended_horizon(&self) -> f64 {
        extended_horizon(self.horizon, self.nodes)
    }
}

pub fn lower_tail_bound(mean: f64, eps: f64) -> f64 {
    (-eps * eps * mean / 2.0).exp()
}

pub fn upper_tail_bound(mean: f64, eps: f64) -> f64 {
    (-eps * eps * mean / 3.0).exp()
}

/// `Pr[N >= t] <= 2^{-t}`, valid once `t >= 5 mu`.
pub fn large_deviation_bound(mean: f64, t: f64) -> Option<f64> {
    (t >= 5.0 * mean).then(|| (-t).exp2())
}

pub fn extended_horizon(horizon: f64, nodes: usize) -> f64 {
    2.0 * horizon + 8.0 * (nodes.max(1) as f64).ln()
}

/// `5T + 3 log2 n`: with high probability no node updates more often.
pub fn update_count_bound(horizon: f64, nodes: usize) -> f64 {
    5.0 * horizon + 3.0 * (nodes.max(1) as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_n_times_t() {
        let b = discrete_continuous_bridge(1.0, 100).unwrap();
        assert_eq!(b.mean, 100.0);
        assert!(discrete_continuous_bridge(0.0, 100).is_err());
        assert!(discrete_continuous_bridge(1.0, 0).is_err());
    }

    #[test]
    fn tail_bounds() {
        assert!((lower_tail_bound(100.0, 0.5) - (-12.5f64).exp()).abs() < 1e-18);
        assert!((upper_tail_bound(30.0, 0.5) - (-2.5f64).exp()).abs() < 1e-15);
        assert_eq!(large_deviation_bound(10.0, 50.0), Some(2f64.powi(-50)));
        assert_eq!(large_deviation_bound(10.0, 49.0), None);
    }

    #[test]
    fn extended_horizon_formula() {
        let b = discrete_continuous_bridge(3.0, 1000).unwrap();
        assert!((b.extended_horizon() - (6.0 + 8.0 * 1000f64.ln())).abs() < 1e-12);
    }
}
