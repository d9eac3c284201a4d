//! Server-side aggregation of client parameter vectors: size-weighted
//! averaging and gate-weighted convex combination.

use crate::error::{Error, Result};

fn check_shapes(updates: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = updates.first() else {
        return Err(Error::Config("no updates to aggregate".into()));
    };
    for (k, u) in updates.iter().enumerate() {
        if u.len() != first.len() {
            return Err(Error::DimensionMismatch {
                context: format!("update from client {k}"),
                expected: first.len(),
                actual: u.len(),
            });
        }
    }
    Ok(first.len())
}

/// Weighted mean of client parameter vectors with weights N_k / ΣN_k.
pub fn fedavg_aggregate(updates: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<f64>> {
    let dim = check_shapes(updates)?;
    if sizes.len() != updates.len() {
        return Err(Error::DimensionMismatch {
            context: "client sizes".into(),
            expected: updates.len(),
            actual: sizes.len(),
        });
    }
    if sizes.iter().any(|&n| n == 0) {
        return Err(Error::Config("client sizes must be positive".into()));
    }
    let total: usize = sizes.iter().sum();
    let weights: Vec<f64> = sizes.iter().map(|&n| n as f64 / total as f64).collect();
    Ok(weighted_sum(updates, &weights, dim))
}

/// Convex combination of client parameter vectors under explicit weights
/// (mean gate weights in mixture mode).
pub fn moe_aggregate(updates: &[Vec<f64>], mean_gate_weights: &[f64]) -> Result<Vec<f64>> {
    let dim = check_shapes(updates)?;
    if mean_gate_weights.len() != updates.len() {
        return Err(Error::DimensionMismatch {
            context: "gate weights".into(),
            expected: updates.len(),
            actual: mean_gate_weights.len(),
        });
    }
    if mean_gate_weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Config("gate weights must be non-negative".into()));
    }
    let sum: f64 = mean_gate_weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "gate weights must sum to 1, got {sum}"
        )));
    }
    Ok(weighted_sum(updates, mean_gate_weights, dim))
}

fn weighted_sum(updates: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (update, &w) in updates.iter().zip(weights) {
        for (o, &v) in out.iter_mut().zip(update) {
            *o += w * v;
        }
    }
    out
}
