//! Lipschitz constant of the filters: the smallest `C` with
//! `E_{c' ~ nu_v}[delta_{u,a,b} f^v_{c,c'}] <= C / Delta` on every edge.

use super::{ModelKind, SpinModel, State};
use crate::error::{Error, Result};

/// Upper limit on `q^(Delta - 1)` for exhaustive evaluation.
pub const EXACT_ENUMERATION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzMode {
    /// Enumerate every neighborhood pair that differs at one neighbor.
    Exact,
    /// Built-in closed forms only.
    ClosedForm,
    /// Closed form when the model has one, otherwise exact.
    Auto,
}

/// Returns `C_hat = Delta * max_{(u,v), a, b, c} E_{c'}[delta_{u,a,b} f^v_{c,c'}]`.
///
/// Closed forms: coloring `2 Delta / q`, hardcore `lambda Delta / (1 + lambda)`,
/// Ising `Delta (1 - exp(-2|beta|))`. The Ising form is an upper bound on the
/// enumerated value; the other two are exact.
pub fn lipschitz_bound(model: &SpinModel, mode: LipschitzMode) -> Result<f64> {
    match mode {
        LipschitzMode::Exact => exact(model),
        LipschitzMode::ClosedForm => closed_form(model)
            .ok_or_else(|| Error::Unsupported("no closed-form Lipschitz bound for custom filters".into())),
        LipschitzMode::Auto => match closed_form(model) {
            Some(c) => Ok(c),
            None => exact(model),
        },
    }
}

fn closed_form(model: &SpinModel) -> Option<f64> {
    let delta = model.graph().max_degree() as f64;
    if delta == 0.0 {
        return Some(0.0);
    }
    match *model.kind() {
        ModelKind::Coloring if model.q() < 2 => Some(0.0),
        ModelKind::Coloring => Some(2.0 * delta / model.q() as f64),
        ModelKind::Hardcore { lambda } => Some(delta * lambda / (1.0 + lambda)),
        ModelKind::Ising { beta } => Some(delta * (1.0 - (-2.0 * beta.abs()).exp())),
        ModelKind::Custom(_) => None,
    }
}

fn exact(model: &SpinModel) -> Result<f64> {
    let graph = model.graph();
    let q = model.q();
    let max_degree = graph.max_degree();
    if max_degree == 0 {
        return Ok(0.0);
    }
    let assignments = (q as u64).checked_pow(max_degree as u32 - 1);
    if assignments.is_none_or(|a| a > EXACT_ENUMERATION_LIMIT) {
        return Err(Error::Unsupported(format!(
            "exact Lipschitz enumeration needs q^(Delta-1) <= {EXACT_ENUMERATION_LIMIT} (q = {q}, Delta = {max_degree})"
        )));
    }

    let mut worst = 0.0f64;
    let mut sigma: Vec<State> = Vec::with_capacity(max_degree);
    let mut tau: Vec<State> = Vec::with_capacity(max_degree);
    for v in 0..graph.node_count() {
        let degree = graph.degree(v);
        if degree == 0 {
            continue;
        }
        let nu = model.proposal(v);
        let rest_count = q.pow(degree as u32 - 1);
        for slot in 0..degree {
            for a in 0..q as State {
                for b in (a + 1)..q as State {
                    for c in 0..q as State {
                        let mut expectation = 0.0;
                        for (cp, &weight) in nu.iter().enumerate() {
                            if weight == 0.0 {
                                continue;
                            }
                            let mut spread = 0.0f64;
                            for code in 0..rest_count {
                                fill_pair(&mut sigma, &mut tau, degree, slot, a, b, code, q);
                                let diff = model.filter(v, c, cp as State, &sigma)
                                    - model.filter(v, c, cp as State, &tau);
                                spread = spread.max(diff.abs());
                            }
                            expectation += weight * spread;
                        }
                        worst = worst.max(expectation);
                    }
                }
            }
        }
    }
    Ok(max_degree as f64 * worst)
}

// Decodes `code` in base q into the shared coordinates of (sigma, tau), with
// sigma[slot] = a and tau[slot] = b.
#[allow(clippy::too_many_arguments)]
fn fill_pair(
    sigma: &mut Vec<State>,
    tau: &mut Vec<State>,
    degree: usize,
    slot: usize,
    a: State,
    b: State,
    mut code: usize,
    q: usize,
) {
    sigma.clear();
    tau.clear();
    for k in 0..degree {
        if k == slot {
            sigma.push(a);
            tau.push(b);
        } else {
            let s = (code % q) as State;
            code /= q;
            sigma.push(s);
            tau.push(s);
        }
    }
}
