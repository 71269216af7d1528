//! Local SGD and inverse-probability-weighted aggregation.

use super::objective::GradientOracle;
use super::ParamVector;
use crate::error::{Error, Result};

/// Runs `steps` SGD steps from `x` and returns the client delta `y_I − y_0`.
pub fn local_update<G: GradientOracle + ?Sized>(
    x: &ParamVector,
    oracle: &mut G,
    client: usize,
    steps: usize,
    lr: f64,
) -> Result<ParamVector> {
    if steps == 0 {
        return Err(Error::invalid("local_steps", "need at least one local step"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("learning_rate", format!("must be positive, got {lr}")));
    }
    let mut y = x.clone();
    let mut grad = vec![0.0; x.dim()];
    for step in 0..steps {
        oracle.stochastic_gradient(&y, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { client, step });
        }
        y.axpy(-lr, &grad);
    }
    if !y.is_finite() {
        return Err(Error::NonFiniteGradient {
            client,
            step: steps - 1,
        });
    }
    Ok(y.difference(x))
}

/// `x + (1/N)·Σₙ (𝟙ₙ/qₙ)·Δₙ`. `deltas[n]` is `Some` exactly for the clients
/// that participated (indicator 1).
pub fn aggregate(x: &ParamVector, deltas: &[Option<ParamVector>], probs: &[f64]) -> Result<ParamVector> {
    if deltas.len() != probs.len() {
        return Err(Error::invalid(
            "probs",
            format!("{} probabilities for {} clients", probs.len(), deltas.len()),
        ));
    }
    if let Some(q) = probs.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::invalid("q", format!("selection probabilities must lie in (0, 1], got {q}")));
    }
    let n = deltas.len() as f64;
    let mut next = x.clone();
    for (delta, &q) in deltas.iter().zip(probs) {
        if let Some(delta) = delta {
            if delta.dim() != x.dim() {
                return Err(Error::DimensionMismatch {
                    expected: x.dim(),
                    actual: delta.dim(),
                });
            }
            next.axpy(1.0 / (n * q), delta);
        }
    }
    Ok(next)
}
