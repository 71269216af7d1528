//! Finite-sum objectives, local SGD, and the unbiased global update.

mod bound;
mod fedavg;
mod objective;
mod param;
mod workload;

pub use bound::{bound_diagnostics, corollary_bound, BoundConstants, BoundDiagnostics};
pub use fedavg::{aggregate, local_update};
pub use objective::{Client, ClientObjective, GradientOracle, MinibatchSampler};
pub use param::ParamVector;
pub use workload::{AnyModel, Model, Quadratic, SoftmaxRegression, TwoLayerNet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N`, `I`, `T`, `γ` and the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub clients: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::invalid("clients", "need at least one client"));
        }
        if self.local_steps == 0 {
            return Err(Error::invalid("local_steps", "need at least one local step"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("rounds", "need at least one round"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}
