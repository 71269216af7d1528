//! Convergence-bound diagnostics for a realized probability schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the nonconvex convergence bound. `f_star` is an estimate,
/// so the resulting bound is itself only an estimate of the true bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Smoothness `L`.
    pub smoothness: f64,
    /// Stochastic-gradient second-moment bound `G`.
    pub grad_bound: f64,
    pub learning_rate: f64,
    pub local_steps: usize,
    pub rounds: usize,
    pub f_initial: f64,
    pub f_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    /// `(1/(T·N))·Σₜ Σₙ 1/qₙᵗ`
    pub sum_inv_q: f64,
    pub corollary_bound: f64,
}

/// `probs_history[t][n] = qₙᵗ`. The average runs over the rows given.
pub fn bound_diagnostics(probs_history: &[Vec<f64>], c: &BoundConstants) -> Result<BoundDiagnostics> {
    if probs_history.is_empty() || probs_history.iter().any(Vec::is_empty) {
        return Err(Error::invalid("probs_history", "need at least one round and one client"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for row in probs_history {
        for &q in row {
            if !(q > 0.0) {
                return Err(Error::invalid("q", format!("probabilities must be positive, got {q}")));
            }
            total += 1.0 / q;
            count += 1;
        }
    }
    let sum_inv_q = total / count as f64;
    Ok(BoundDiagnostics {
        sum_inv_q,
        corollary_bound: corollary_bound(sum_inv_q, c)?,
    })
}

/// `2(f(x₀) − f*)/(γTI) + γ²L²(I−1)²G² + γLIG²·sum_inv_q`
pub fn corollary_bound(sum_inv_q: f64, c: &BoundConstants) -> Result<f64> {
    if !(c.smoothness > 0.0) {
        return Err(Error::invalid("smoothness", "L must be positive"));
    }
    if !(c.grad_bound > 0.0) {
        return Err(Error::invalid("grad_bound", "G must be positive"));
    }
    if !(c.learning_rate > 0.0) || c.local_steps == 0 || c.rounds == 0 {
        return Err(Error::invalid("learning_rate", "γ, I and T must be positive"));
    }
    let (l, g, lr) = (c.smoothness, c.grad_bound, c.learning_rate);
    let i = c.local_steps as f64;
    let t = c.rounds as f64;
    let optimality = 2.0 * (c.f_initial - c.f_star) / (lr * t * i);
    let drift = (lr * l * (i - 1.0) * g).powi(2);
    let sampling = lr * l * i * g * g * sum_inv_q;
    Ok(optimality + drift + sampling)
}
